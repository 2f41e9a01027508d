"""End-to-end experiments: train, calibrate, select rounds, evaluate, save."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.special import expit

from .boost import (BaseSpec, BoostConfig, BoostedEnsemble, boost_train,
                    effective_stages, staged_scores)
from .calib import (CalibrationSet, IsotonicCalibrator, SigmoidCalibrator,
                    calibrator_from_dict, calibrator_to_dict, cv_staged_scores,
                    isotonic_apply, logistic_correction, pav_fit, platt_fit,
                    sigmoid_apply)
from .dataset import (ConfigurationError, Dataset, SplitSpec, load_dataset,
                      stratified_sample, stratified_split)
from .metrics import brier_score, cross_entropy, roc_auc
from .synthetic import make_synthetic

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
METHODS = ("none", "logistic", "platt", "isotonic")
# table column names per condition; LOGLOSS is a training loss, not a method
CONDITIONS = ("RAW", "PLATT", "ISO", "LOGIST", "LOGLOSS")
METRICS = ("cross_entropy", "brier")

# paper-style grids; DESK_GRID caps runtime for everyday runs
STUMP_GRID = tuple(2 ** k for k in range(1, 14))
TREE_GRID = tuple(2 ** k for k in range(1, 12))
DESK_GRID = tuple(2 ** k for k in range(1, 11))


class SchemaVersionError(ValueError):
    pass


def derive_seed(master: int, *keys: int) -> int:
    """Independent 63-bit seed for a (trial, gridpoint, ...) stream."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


# ------------------------------------------------------------------ config

@dataclass(frozen=True)
class DataSource:
    """Either a file (``path``/``format``/``label``) or a synthetic task."""

    path: Optional[str] = None
    format: str = "csv"
    label: Union[str, int] = -1
    positive_label: Optional[str] = None
    synthetic: Optional[str] = None
    n_samples: int = 10000

    def load(self, seed: int = 0) -> Dataset:
        if self.synthetic:
            return make_synthetic(self.synthetic, self.n_samples, seed=seed)
        if not self.path:
            raise ConfigurationError("no data source given")
        return load_dataset(self.path, self.format, self.label, self.positive_label)


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataSource = field(default_factory=DataSource)
    base: BaseSpec = field(default_factory=BaseSpec)
    loss: str = "exponential"
    grid: tuple = DESK_GRID
    methods: tuple = METHODS
    include_logloss: bool = True
    folds: int = 3
    calibration_sizes: tuple = (32, 64, 128, 256, 512, 1024, 2048, 4096, 8192)
    trials: int = 10
    seed: int = 0
    validation_fraction: float = 0.2
    train_fraction: float = 0.5
    clip_eps: float = 1e-6

    def __post_init__(self):
        grid = tuple(int(g) for g in self.grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise ConfigurationError("iteration grid must be non-empty and strictly increasing")
        object.__setattr__(self, "grid", grid)
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigurationError(f"unknown calibration method {m!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["base"] = self.base.to_dict()
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ------------------------------------------------------------------ bundle

@dataclass
class ModelBundle:
    """An ensemble plus the calibration map applied to its scores.

    ``method`` is one of ``none`` (the ensemble's own probability),
    ``logistic`` (logistic correction of ``F``), ``platt`` or ``isotonic``
    (calibrator applied to ``f``).
    """

    ensemble: BoostedEnsemble
    method: str = "none"
    calibrator: object = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        expected = {"none": type(None), "logistic": str,
                    "platt": SigmoidCalibrator, "isotonic": IsotonicCalibrator}
        if self.method == "logistic" and self.calibrator is None:
            self.calibrator = "logistic"
        if not isinstance(self.calibrator, expected[self.method]):
            raise ConfigurationError(
                f"calibrator {type(self.calibrator).__name__} does not match "
                f"method {self.method!r}")

    def predict(self, X) -> np.ndarray:
        e = self.ensemble
        if self.method == "none":
            return e.probability(X)
        if self.method == "logistic":
            return logistic_correction(e.raw_score(X))
        f = e.normalized_score(X)
        if self.method == "platt":
            return sigmoid_apply(self.calibrator, f)
        return isotonic_apply(self.calibrator, f)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "method": self.method,
                "ensemble": self.ensemble.to_dict(),
                "calibrator": calibrator_to_dict(
                    None if self.method == "none" else self.calibrator),
                "metadata": self.metadata}

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelBundle":
        version = obj.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaVersionError(
                f"model schema version {version!r} is not supported "
                f"(expected {SCHEMA_VERSION})")
        return cls(BoostedEnsemble.from_dict(obj["ensemble"]), obj["method"],
                   calibrator_from_dict(obj.get("calibrator")),
                   dict(obj.get("metadata", {})))


def save_model(bundle: ModelBundle, path) -> None:
    Path(path).write_text(json.dumps(bundle.to_dict(), indent=1) + "\n")


def load_model(path) -> ModelBundle:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: corrupt model file: {exc}") from None
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: corrupt model file: top level is not an object")
    return ModelBundle.from_dict(obj)


def fit_calibrator(method: str, scores: np.ndarray, targets: np.ndarray):
    cs = CalibrationSet(scores, targets)
    if method == "platt":
        return platt_fit(cs)
    if method == "isotonic":
        return pav_fit(cs)
    raise ConfigurationError(f"method {method!r} has no fitted calibrator")


def apply_calibrator(c, scores):
    if isinstance(c, SigmoidCalibrator):
        return sigmoid_apply(c, scores)
    return isotonic_apply(c, scores)


def train_bundle(d: Dataset, cfg: BoostConfig, method: str = "none", folds: int = 3,
                 seed: int = 0) -> ModelBundle:
    """Train on all of ``d``; platt/isotonic calibrate on out-of-fold scores."""
    e = boost_train(d, cfg)
    cal = None
    if method in ("platt", "isotonic"):
        scores, targets = cv_staged_scores(d, cfg, [cfg.rounds], folds, seed)
        cal = fit_calibrator(method, scores[0], targets)
    meta = {"rounds_requested": cfg.rounds, "rounds_trained": e.n_stages,
            "stop_reason": e.stop_reason, "early_stop": e.stop_reason != "max_rounds",
            "seed": seed, "folds": folds, "dataset": d.name, "n_train": len(d)}
    return ModelBundle(e, method, cal, meta)


# --------------------------------------------------------------- selection

def _metric_fn(metric: str, clip_eps: float) -> Callable:
    if metric == "cross_entropy":
        return lambda p, y: cross_entropy(p, y, clip_eps)
    if metric == "brier":
        return brier_score
    raise ConfigurationError(f"unknown selection metric {metric!r}")


def select_iterations(d_val: Dataset, candidates: Mapping[int, object],
                      metric: str = "cross_entropy", clip_eps: float = 1e-6) -> int:
    """Round count whose predictions score best on the validation set.

    ``candidates`` maps a round count to a :class:`ModelBundle` or to an array
    of validation predictions. Ties go to the smaller round count.
    """
    if len(d_val) == 0:
        raise ConfigurationError("empty validation set")
    if not candidates:
        raise ConfigurationError("no candidate round counts")
    fn = _metric_fn(metric, clip_eps)
    best_k, best_v = None, np.inf
    for k in sorted(candidates):
        c = candidates[k]
        p = c.predict(d_val.features) if isinstance(c, ModelBundle) else c
        v = fn(p, d_val.labels)
        if v < best_v:
            best_k, best_v = k, v
    return best_k


# -------------------------------------------------------------- experiment

@dataclass
class ConditionResult:
    condition: str
    metric: str
    rounds: int
    value: float


def _stage_predictions(e: BoostedEnsemble, X, grid, kind):
    return staged_scores(e, X, effective_stages(e, grid), kind=kind)


def evaluate_conditions(train: Dataset, val: Dataset, test: Dataset, base: BaseSpec,
                        grid: Sequence[int], methods: Sequence[str] = METHODS,
                        include_logloss: bool = True, folds: int = 3, seed: int = 0,
                        clip_eps: float = 1e-6) -> tuple[list[ConditionResult], dict]:
    """Train once, calibrate per gridpoint, select on ``val``, score ``test``.

    Returns the result rows and a diagnostics dict holding, for PLATT, the
    rank-invariance check (AUC of calibrated and raw test scores at the
    selected round count, and whether ``A < 0``).
    """
    grid = [int(g) for g in grid]
    T = max(grid)
    cfg = BoostConfig(rounds=T, loss="exponential", base=base)
    e = boost_train(train, cfg)
    st = effective_stages(e, grid)
    f_val = staged_scores(e, val.features, st)
    f_test = staged_scores(e, test.features, st)

    # per condition: list over grid of (val predictions, test predictions)
    preds: dict[str, list] = {}
    fitted: dict[str, list] = {}
    if "none" in methods:
        preds["RAW"] = list(zip(f_val, f_test))
    if "logistic" in methods:
        F_val = staged_scores(e, val.features, st, kind="raw")
        F_test = staged_scores(e, test.features, st, kind="raw")
        preds["LOGIST"] = [(logistic_correction(a), logistic_correction(b))
                           for a, b in zip(F_val, F_test)]
    wanted = [m for m in ("platt", "isotonic") if m in methods]
    if wanted:
        cv_scores, cv_targets = cv_staged_scores(train, cfg, grid, folds, seed)
        for m in wanted:
            name = "PLATT" if m == "platt" else "ISO"
            cals = [fit_calibrator(m, s, cv_targets) for s in cv_scores]
            fitted[name] = cals
            preds[name] = [(apply_calibrator(c, a), apply_calibrator(c, b))
                           for c, a, b in zip(cals, f_val, f_test)]
    if include_logloss:
        e_log = boost_train(train, BoostConfig(rounds=T, loss="logloss", base=base))
        st_log = effective_stages(e_log, grid)
        Fv = staged_scores(e_log, val.features, st_log, kind="raw")
        Ft = staged_scores(e_log, test.features, st_log, kind="raw")
        preds["LOGLOSS"] = [(expit(a), expit(b)) for a, b in zip(Fv, Ft)]

    rows: list[ConditionResult] = []
    diag: dict = {"trained_rounds": e.n_stages, "stop_reason": e.stop_reason}
    for name in CONDITIONS:
        if name not in preds:
            continue
        chosen = {}
        for metric in METRICS:
            cand = {g: pv for g, (pv, _) in zip(grid, preds[name])}
            k = select_iterations(val, cand, metric, clip_eps)
            i = grid.index(k)
            chosen[metric] = i
            pt = preds[name][i][1]
            rows.append(ConditionResult(name, metric, k,
                                        _metric_fn(metric, clip_eps)(pt, test.labels)))
        i = chosen["cross_entropy"]
        pt = preds[name][i][1]
        auc = roc_auc(pt, test.labels)
        rows.append(ConditionResult(name, "auc", grid[i], auc))
        if name == "PLATT":
            c = fitted["PLATT"][i]
            raw_auc = roc_auc(f_test[i], test.labels)
            diag["platt_rank"] = {"rounds": grid[i], "A": c.A,
                                  "auc_calibrated": auc, "auc_raw": raw_auc,
                                  "identical": bool(auc == raw_auc and c.A < 0)}
    return rows, diag


def _split_for_trial(d: Dataset, cfg: ExperimentConfig, trial: int):
    n_val = int(round(cfg.validation_fraction * len(d)))
    spec = SplitSpec(cfg.train_fraction, n_val, derive_seed(cfg.seed, trial, 0))
    train, val, test = stratified_split(d, spec)
    return train, val, test


def run_calibration_experiment(cfg: ExperimentConfig, d: Optional[Dataset] = None) -> dict:
    """Per-trial results and per-condition means for one dataset.

    Each trial re-splits the data into train / validation / test with its
    own seed. Returns ``{"rows": [...], "summary": [...], "diagnostics": [...]}``.
    """
    if d is None:
        d = cfg.data.load(derive_seed(cfg.seed, 0xDA7A))
    rows, diags = [], []
    for trial in range(cfg.trials):
        train, val, test = _split_for_trial(d, cfg, trial)
        res, diag = evaluate_conditions(
            train, val, test, cfg.base, cfg.grid, cfg.methods, cfg.include_logloss,
            cfg.folds, derive_seed(cfg.seed, trial, 1), cfg.clip_eps)
        for r in res:
            rows.append({"dataset": d.name, "base": _base_label(cfg.base),
                         "trial": trial, "condition": r.condition,
                         "metric": r.metric, "rounds": r.rounds, "value": r.value})
        diag["trial"] = trial
        diags.append(diag)
        log.info("trial %d done", trial)
    return {"rows": rows, "summary": summarize(rows), "diagnostics": diags,
            "config": cfg.to_dict(), "config_digest": cfg.digest()}


def _base_label(base: BaseSpec) -> str:
    return "stump" if base.kind == "stump" else f"tree{base.max_depth}"


def summarize(rows: list[dict]) -> list[dict]:
    """Wide table: one row per (dataset, base, metric), one column per condition."""
    keys = sorted({(r["dataset"], r["base"], r["metric"]) for r in rows},
                  key=lambda k: (k[0], k[1], ("cross_entropy", "brier", "auc").index(k[2])))
    out = []
    for ds, base, metric in keys:
        row = {"dataset": ds, "base": base, "metric": metric}
        for cond in CONDITIONS:
            vals = [r["value"] for r in rows if r["dataset"] == ds and r["base"] == base
                    and r["metric"] == metric and r["condition"] == cond]
            row[cond] = float(np.mean(vals)) if vals else None
        out.append(row)
    return out


# ---------------------------------------------------------- learning curve

def run_learning_curve(cfg: ExperimentConfig, d: Optional[Dataset] = None,
                       rounds: Optional[int] = None) -> dict:
    """Test Brier score of Platt and isotonic calibration against calibration-set size.

    Per trial the data is split into train / calibration pool / test; a model
    of ``rounds`` rounds (default: the largest grid value) is trained once,
    then for every size a stratified calibration set is drawn from the pool.
    The uncalibrated score is reported alongside as ``RAW``.
    """
    if d is None:
        d = cfg.data.load(derive_seed(cfg.seed, 0xDA7A))
    rounds = int(rounds or max(cfg.grid))
    sizes = sorted(int(s) for s in cfg.calibration_sizes)
    rows, skipped = [], []
    for trial in range(cfg.trials):
        train, pool, test = _split_for_trial(d, cfg, trial)
        e = boost_train(train, BoostConfig(rounds=rounds, loss=cfg.loss, base=cfg.base))
        f_pool = e.normalized_score(pool.features)
        f_test = e.normalized_score(test.features)
        raw = brier_score(f_test, test.labels)
        for size in sizes:
            if size > len(pool):
                if trial == 0:
                    skipped.append({"size": size,
                                    "reason": f"only {len(pool)} examples available"})
                continue
            idx = stratified_sample(pool, size, derive_seed(cfg.seed, trial, 2, size))
            y_cal = pool.labels[idx]
            rows.append({"size": size, "trial": trial, "method": "RAW", "brier": raw})
            for method, name in (("platt", "PLATT"), ("isotonic", "ISO")):
                if y_cal.min() == y_cal.max():
                    skipped.append({"size": size, "trial": trial, "method": name,
                                    "reason": "calibration sample has one class"})
                    continue
                c = fit_calibrator(method, f_pool[idx], y_cal)
                rows.append({"size": size, "trial": trial, "method": name,
                             "brier": brier_score(apply_calibrator(c, f_test),
                                                  test.labels)})
    agg = []
    for size in sizes:
        for name in ("RAW", "PLATT", "ISO"):
            v = np.array([r["brier"] for r in rows
                          if r["size"] == size and r["method"] == name])
            if v.size == 0:
                continue
            se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
            agg.append({"size": size, "method": name, "mean": float(v.mean()),
                        "stderr": se, "n": int(v.size)})
    return {"rows": rows, "aggregate": agg, "skipped": skipped,
            "rounds": rounds, "config": cfg.to_dict(), "config_digest": cfg.digest()}


# ----------------------------------------------------------------- output

def rows_to_csv(rows: Sequence[Mapping], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r.get(c) is None else
                    (repr(float(r[c])) if isinstance(r[c], (float, np.floating)) else r[c])
                    for c in columns])
    return buf.getvalue()


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


METRIC_COLUMNS = ("dataset", "base", "trial", "condition", "metric", "rounds", "value")
SUMMARY_COLUMNS = ("dataset", "base", "metric") + CONDITIONS
CURVE_COLUMNS = ("size", "method", "mean", "stderr", "n")
CURVE_TRIAL_COLUMNS = ("size", "trial", "method", "brier")
