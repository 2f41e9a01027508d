"""Loading, label conversion and deterministic partitioning of binary data.

All shuffling goes through ``numpy.random.Generator(PCG64(seed))`` and its
``permutation`` method (a Fisher-Yates shuffle), so partitions depend only on
the seed and the dataset size.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np


class DatasetError(ValueError):
    """Base class for dataset problems."""


class FormatError(DatasetError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LabelCardinalityError(DatasetError):
    pass


class ShapeError(DatasetError):
    pass


class ConfigurationError(DatasetError):
    pass


class StratificationError(DatasetError):
    pass


class InfeasibleSplitError(DatasetError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class Dataset:
    """Immutable binary classification table.

    ``features`` is an ``(n, d)`` float array and ``labels`` an ``(n,)`` array
    of 0/1 integers. Both arrays are made read-only on construction. Only
    split parts may be empty; loaders reject files without rows.
    """

    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels)
        if X.size == 0 and X.ndim < 2:
            X = X.reshape(0, 0)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ShapeError("features must be a 2-D array")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ShapeError(
                f"labels has shape {y.shape}, expected ({X.shape[0]},)")
        if not np.all(np.isfinite(X)):
            raise DatasetError("features contain missing or non-finite values")
        if not np.all((y == 0) | (y == 1)):
            raise LabelCardinalityError("labels must be 0 or 1")
        y = y.astype(np.int64)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def signed_labels(self) -> np.ndarray:
        """Labels in {-1, +1}."""
        return 2 * self.labels - 1

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def n_negative(self) -> int:
        return len(self) - self.n_positive

    def subset(self, indices: Sequence[int], name: Optional[str] = None) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx],
                       name if name is not None else self.name)


@dataclass(frozen=True)
class SplitSpec:
    """Sizes for a train / calibration / test split.

    ``calibration_size`` rows are taken first; ``train_fraction`` of the
    remaining rows form the training part and the rest is the test part.
    """

    train_fraction: float
    calibration_size: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigurationError("train_fraction must be in (0, 1]")
        if self.calibration_size < 0:
            raise ConfigurationError("calibration_size must be >= 0")


@dataclass(frozen=True)
class FoldPartition:
    n_folds: int
    assignment: np.ndarray = field(repr=False)

    def fold(self, k: int) -> np.ndarray:
        """Indices of the examples in fold ``k``, in ascending order."""
        return np.flatnonzero(self.assignment == k)

    def complement(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != k)

    def sizes(self) -> list[int]:
        return np.bincount(self.assignment, minlength=self.n_folds).tolist()


# ---------------------------------------------------------------- loading

def _sort_key(symbol: str):
    try:
        return (0, float(symbol), symbol)
    except ValueError:
        return (1, 0.0, symbol)


def _map_labels(raw: Sequence[str], positive_label: Optional[str]) -> np.ndarray:
    distinct = sorted(set(raw), key=_sort_key)
    if len(distinct) > 2:
        raise LabelCardinalityError(
            f"expected 2 distinct labels, found {len(distinct)}: {distinct[:10]}")
    numeric = all(_sort_key(s)[0] == 0 for s in distinct)
    if positive_label is None:
        if len(distinct) == 1:
            # a lone 0/1 label is kept as is; anything else is ambiguous
            if numeric and float(distinct[0]) in (0.0, 1.0):
                positive_label = distinct[0] if float(distinct[0]) == 1.0 else None
            else:
                raise LabelCardinalityError(
                    "single label value; pass an explicit positive label")
        else:
            positive_label = distinct[-1]
    if positive_label is not None and numeric and _sort_key(positive_label)[0] == 0:
        pos = float(positive_label)
        return np.array([float(s) == pos for s in raw], dtype=np.int64)
    return np.array([s == positive_label for s in raw], dtype=np.int64)


def _load_csv(path: Path, label_column: Union[str, int]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty file", 1) from None
        header = [h.strip() for h in header]
        if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
            if label_column not in header:
                raise FormatError(f"label column {label_column!r} not in header", 1)
            label_idx = header.index(label_column)
        else:
            label_idx = int(label_column)
            if not -len(header) <= label_idx < len(header):
                raise FormatError(f"label column index {label_idx} out of range", 1)
            label_idx %= len(header)
        rows, raw_labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ShapeError(
                    f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            values = []
            for j, cell in enumerate(row):
                if j == label_idx:
                    continue
                cell = cell.strip()
                if cell == "" or cell.lower() in ("na", "nan", "?"):
                    raise FormatError(f"missing value in column {header[j]!r}", lineno)
                try:
                    values.append(float(cell))
                except ValueError:
                    raise FormatError(
                        f"non-numeric value {cell!r} in column {header[j]!r}",
                        lineno) from None
            rows.append(values)
            raw_labels.append(row[label_idx].strip())
    if not rows:
        raise FormatError("no data rows", 2)
    return np.array(rows, dtype=np.float64), raw_labels


def _load_libsvm(path: Path, n_features: Optional[int]):
    entries, raw_labels = [], []
    max_index = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            raw_labels.append(tokens[0])
            pairs = []
            last = 0
            for tok in tokens[1:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise FormatError(f"bad feature token {tok!r}", lineno) from None
                if idx < 1 or idx <= last:
                    raise FormatError(
                        "feature indices must be 1-based and ascending", lineno)
                if not np.isfinite(val):
                    raise FormatError(f"non-finite value {val_s!r}", lineno)
                last = idx
                pairs.append((idx, val))
            max_index = max(max_index, last)
            entries.append((lineno, pairs))
    if not entries:
        raise FormatError("no data rows", 1)
    width = max_index if n_features is None else n_features
    X = np.zeros((len(entries), width), dtype=np.float64)
    for r, (lineno, pairs) in enumerate(entries):
        for idx, val in pairs:
            if idx > width:
                raise ShapeError(
                    f"line {lineno}: feature index {idx} exceeds declared width {width}")
            X[r, idx - 1] = val
    return X, raw_labels


def load_dataset(path, format: str = "csv", label_column: Union[str, int] = -1,
                 positive_label: Optional[str] = None,
                 n_features: Optional[int] = None,
                 name: Optional[str] = None) -> Dataset:
    """Read a CSV or LIBSVM file into a :class:`Dataset`.

    Parameters
    ----------
    path : path-like
        File to read.
    format : {"csv", "libsvm"}
        CSV files need a header row; the label column is chosen by name or by
        0-based index (negative indices count from the end).
    label_column : str or int
        Ignored for LIBSVM, where the label is the first token of each line.
    positive_label : str, optional
        Raw label mapped to 1. By default the larger raw label is positive
        (numeric order if every label parses as a number, otherwise
        lexicographic).
    n_features : int, optional
        LIBSVM width; defaults to the largest index seen.
    """
    path = Path(path)
    if format == "csv":
        X, raw = _load_csv(path, label_column)
    elif format == "libsvm":
        X, raw = _load_libsvm(path, n_features)
    else:
        raise ConfigurationError(f"unknown format {format!r}")
    y = _map_labels(raw, positive_label)
    return Dataset(X, y, name or path.stem)


def binarize_multiclass(raw_labels: Iterable, policy: str = "largest_class_positive",
                        positive: Optional[Iterable] = None) -> np.ndarray:
    """Collapse a multiclass label vector to 0/1.

    ``policy="largest_class_positive"`` makes the modal class positive; ties go
    to the smallest label in sort order. ``policy="explicit"`` makes every
    label in ``positive`` positive.
    """
    raw = list(raw_labels)
    counts = Counter(raw)
    if len(counts) < 2:
        raise ConfigurationError("need at least two distinct labels")
    if policy == "largest_class_positive":
        top = max(counts.values())
        pos_set = {min(k for k, c in counts.items() if c == top)}
    elif policy == "explicit":
        pos_set = set(positive or ())
        if not pos_set:
            raise ConfigurationError("explicit policy needs a non-empty positive set")
        if not pos_set & counts.keys():
            raise ConfigurationError("positive set does not match any observed label")
    else:
        raise ConfigurationError(f"unknown policy {policy!r}")
    return np.array([r in pos_set for r in raw], dtype=np.int64)


# -------------------------------------------------------------- splitting

def _allocate(total_pos: int, total: int, sizes: list[int]) -> list[int]:
    """Positive count per part; each part is rounded, the last takes the rest."""
    rate = total_pos / total
    counts, left_pos, left = [], total_pos, total
    for i, n in enumerate(sizes):
        if i == len(sizes) - 1:
            k = left_pos
        else:
            k = int(np.floor(n * rate + 0.5))
            k = min(max(k, n - (left - left_pos)), left_pos, n)
            k = max(k, 0)
        counts.append(k)
        left_pos -= k
        left -= n
    return counts


def stratified_split(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Split into (train, calibration, test) keeping the class ratio per part.

    Each part's positive count is within one example of its proportional
    share. Rows inside each part keep the shuffled order.
    """
    n = len(d)
    if d.n_positive == 0 or d.n_negative == 0:
        raise StratificationError("both classes must be present")
    n_cal = spec.calibration_size
    if n_cal >= n:
        raise InfeasibleSplitError(
            f"calibration_size {n_cal} leaves no training rows out of {n}")
    rest = n - n_cal
    n_train = int(np.floor(spec.train_fraction * rest + 0.5))
    n_train = min(n_train, rest)
    if n_train < 1:
        raise InfeasibleSplitError("training part would be empty")
    sizes = [n_cal, n_train, rest - n_train]
    pos_counts = _allocate(d.n_positive, n, sizes)

    rng = make_rng(spec.seed)
    pos = np.flatnonzero(d.labels == 1)
    neg = np.flatnonzero(d.labels == 0)
    pos = pos[rng.permutation(pos.size)]
    neg = neg[rng.permutation(neg.size)]

    parts, p_at, n_at = [], 0, 0
    for size, k in zip(sizes, pos_counts):
        idx = np.concatenate([pos[p_at:p_at + k], neg[n_at:n_at + size - k]])
        p_at += k
        n_at += size - k
        idx = idx[rng.permutation(idx.size)]
        if size > 0 and (k == 0 or k == size):
            raise StratificationError(
                f"a part of size {size} would contain a single class")
        parts.append(idx)
    cal, train, test = parts
    return (d.subset(train, f"{d.name}:train"),
            d.subset(cal, f"{d.name}:calibration"),
            d.subset(test, f"{d.name}:test"))


def kfold_partition(d: Dataset, n_folds: int = 3, seed: int = 0) -> FoldPartition:
    """Stratified C-fold assignment.

    Examples are shuffled within each class, negatives then positives are laid
    end to end, and fold indices are dealt round-robin along that order. Fold
    sizes therefore differ by at most one, and so do per-class counts.
    """
    n = len(d)
    if n_folds < 2:
        raise ConfigurationError("need at least 2 folds")
    if n_folds > n:
        raise InfeasibleSplitError(f"{n_folds} folds requested for {n} examples")
    rng = make_rng(seed)
    neg = np.flatnonzero(d.labels == 0)
    pos = np.flatnonzero(d.labels == 1)
    order = np.concatenate([neg[rng.permutation(neg.size)],
                            pos[rng.permutation(pos.size)]])
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % n_folds
    assignment.setflags(write=False)
    return FoldPartition(n_folds, assignment)


def stratified_sample(d: Dataset, size: int, seed: int = 0) -> np.ndarray:
    """Indices of ``size`` rows drawn without replacement, class ratio kept."""
    n = len(d)
    if not 0 < size <= n:
        raise InfeasibleSplitError(f"cannot draw {size} rows from {n}")
    k = _allocate(d.n_positive, n, [size, n - size])[0]
    rng = make_rng(seed)
    pos = np.flatnonzero(d.labels == 1)
    neg = np.flatnonzero(d.labels == 0)
    idx = np.concatenate([pos[rng.permutation(pos.size)][:k],
                          neg[rng.permutation(neg.size)][:size - k]])
    return idx[rng.permutation(idx.size)]
