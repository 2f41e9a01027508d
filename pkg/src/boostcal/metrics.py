"""Probability scoring rules, ROC AUC and binned calibration summaries.

Bins are equal-width on [0, 1]; bin ``b`` of ``n`` covers ``(b/n, (b+1)/n]``
and bin 0 also holds 0.0.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .dataset import ShapeError


class MetricError(ValueError):
    pass


def _pair(p, y):
    p = np.asarray(p, dtype=np.float64).ravel()
    y = np.asarray(y).ravel()
    if p.shape != y.shape:
        raise ShapeError(f"length mismatch: {p.size} predictions, {y.size} labels")
    if p.size == 0:
        raise ShapeError("need at least one example")
    return p, y.astype(np.float64)


def brier_score(p, y) -> float:
    """Mean squared difference between probabilities and 0/1 outcomes."""
    p, y = _pair(p, y)
    return float(np.mean((p - y) ** 2))


def cross_entropy(p, y, clip_eps: float = 1e-6) -> float:
    """Mean natural-log loss after clipping ``p`` into ``[eps, 1 - eps]``."""
    if not 0.0 < clip_eps < 0.5:
        raise MetricError("clip_eps must be in (0, 0.5)")
    p, y = _pair(p, y)
    p = np.clip(p, clip_eps, 1.0 - clip_eps)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def roc_auc(scores, y) -> float:
    """Mann-Whitney AUC; tied positive/negative pairs count one half."""
    s, y = _pair(scores, y)
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC is undefined with a single class")
    ranks = rankdata(s, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def bin_index(p, n_bins: int) -> np.ndarray:
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    idx = np.searchsorted(edges, np.asarray(p, dtype=np.float64), side="left") - 1
    return np.clip(idx, 0, n_bins - 1)


@dataclass(frozen=True)
class Bin:
    lower: float
    upper: float
    count: int
    mean_predicted: Optional[float] = None
    fraction_positive: Optional[float] = None


def _cell(v) -> str:
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


FIELDS = ("lower", "upper", "count", "mean_predicted", "fraction_positive")


@dataclass(frozen=True)
class BinTable:
    """Per-bin rows shared by reliability diagrams and histograms."""

    bins: tuple

    @property
    def counts(self) -> list[int]:
        return [b.count for b in self.bins]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FIELDS)
        for b in self.bins:
            w.writerow([_cell(getattr(b, k)) for k in FIELDS])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"bins": [asdict(b) for b in self.bins]}, indent=2)


class ReliabilityDiagram(BinTable):
    pass


class PredictionHistogram(BinTable):
    pass


def _check_bins(n_bins):
    if n_bins < 2:
        raise MetricError("need at least 2 bins")


def reliability_diagram(p, y, n_bins: int = 10) -> ReliabilityDiagram:
    """Per-bin mean prediction against observed positive fraction."""
    _check_bins(n_bins)
    p, y = _pair(p, y)
    idx = bin_index(p, n_bins)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    counts = np.bincount(idx, minlength=n_bins)
    sum_p = np.bincount(idx, weights=p, minlength=n_bins)
    sum_y = np.bincount(idx, weights=y, minlength=n_bins)
    bins = []
    for b in range(n_bins):
        c = int(counts[b])
        if c:
            lo, hi = float(edges[b]), float(edges[b + 1])
            mean = min(max(float(sum_p[b] / c), lo), hi)  # guard rounding drift
            bins.append(Bin(lo, hi, c, mean, float(sum_y[b] / c)))
        else:
            bins.append(Bin(float(edges[b]), float(edges[b + 1]), 0))
    return ReliabilityDiagram(tuple(bins))


def prediction_histogram(p, n_bins: int = 20) -> PredictionHistogram:
    _check_bins(n_bins)
    p = np.asarray(p, dtype=np.float64).ravel()
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    counts = np.bincount(bin_index(p, n_bins), minlength=n_bins)
    return PredictionHistogram(tuple(
        Bin(float(edges[b]), float(edges[b + 1]), int(counts[b]))
        for b in range(n_bins)))


def extreme_fraction(p, margin: float = 0.05) -> float:
    """Share of predictions in ``[0, margin]`` or ``[1 - margin, 1]``."""
    p = np.asarray(p, dtype=np.float64)
    return float(np.mean((p <= margin) | (p >= 1.0 - margin)))
