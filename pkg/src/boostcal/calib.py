"""Score-to-probability calibration for boosted ensembles.

Three maps are provided: the closed-form logistic correction of the raw
score ``F``, a two-parameter sigmoid fitted by maximum likelihood (Platt
scaling) and a monotone step function fitted by pool-adjacent-violators.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .boost import BoostConfig, boost_train, staged_scores
from .dataset import Dataset, kfold_partition

log = logging.getLogger(__name__)


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationSet:
    scores: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64).ravel()
        t = np.asarray(self.targets).ravel().astype(np.int64)
        if s.shape != t.shape:
            raise CalibrationError("scores and targets differ in length")
        if not np.all((t == 0) | (t == 1)):
            raise CalibrationError("targets must be 0 or 1")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "targets", t)

    def __len__(self) -> int:
        return self.scores.size

    @property
    def n_plus(self) -> int:
        return int(self.targets.sum())

    @property
    def n_minus(self) -> int:
        return len(self) - self.n_plus


# ----------------------------------------------------------- sigmoid maps

def logistic_correction(F):
    """``1 / (1 + exp(-2F))``: probability implied by an exponential-loss score."""
    return expit(2.0 * np.asarray(F, dtype=np.float64))


@dataclass(frozen=True)
class SigmoidCalibrator:
    """``p = 1 / (1 + exp(A * s + B))``.

    Logistic correction is the instance ``A=-2, B=0`` applied to ``F``.
    """

    A: float
    B: float
    converged: bool = True
    iterations: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.A) and np.isfinite(self.B)):
            raise CalibrationError("sigmoid parameters must be finite")

    @property
    def increasing(self) -> bool:
        return self.A < 0

    def __call__(self, s):
        return sigmoid_apply(self, s)

    def to_dict(self) -> dict:
        return {"sigmoid": {"A": float(self.A), "B": float(self.B)}}


def sigmoid_apply(c: SigmoidCalibrator, s):
    s = np.asarray(s, dtype=np.float64)
    return expit(-(c.A * s + c.B))


def platt_targets(n_plus: int, n_minus: int) -> tuple[float, float]:
    """Smoothed targets ``((N+ + 1)/(N+ + 2), 1/(N- + 2))``."""
    return (n_plus + 1.0) / (n_plus + 2.0), 1.0 / (n_minus + 2.0)


def smoothed_targets(cs: CalibrationSet) -> np.ndarray:
    hi, lo = platt_targets(cs.n_plus, cs.n_minus)
    return np.where(cs.targets == 1, hi, lo)


def sigmoid_nll(A: float, B: float, scores: np.ndarray, t: np.ndarray) -> float:
    """Negative log-likelihood of soft targets ``t`` under the sigmoid ``(A, B)``."""
    z = A * scores + B
    # -t log p - (1-t) log(1-p) with p = 1/(1+e^z)  ==  log(1+e^z) - (1-t) z
    return float(np.sum(np.logaddexp(0.0, z) - (1.0 - t) * z))


def platt_fit(cs: CalibrationSet, max_iter: int = 200, step_tol: float = 1e-10,
              nll_tol: float = 1e-12) -> SigmoidCalibrator:
    """Fit ``(A, B)`` by Newton's method with backtracking on the sigmoid NLL.

    Targets are the smoothed values from :func:`platt_targets`. The search
    starts at ``A=0, B=ln((N- + 1)/(N+ + 1))`` and stops when the step's
    max-norm drops below ``step_tol`` or the NLL improves by less than
    ``nll_tol``. Hitting ``max_iter`` returns the best iterate with
    ``converged=False``.
    """
    if len(cs) == 0:
        raise CalibrationError("empty calibration set")
    if cs.n_plus == 0 or cs.n_minus == 0:
        raise CalibrationError("calibration set needs both classes")
    f = cs.scores
    t = smoothed_targets(cs)
    A, B = 0.0, float(np.log((cs.n_minus + 1.0) / (cs.n_plus + 1.0)))
    nll = sigmoid_nll(A, B, f, t)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(-(A * f + B))
        d1 = t - p                      # dNLL/dz
        d2 = p * (1.0 - p)              # d2NLL/dz2
        g = np.array([np.dot(d1, f), d1.sum()])
        H = np.array([[np.dot(d2, f * f), np.dot(d2, f)],
                      [np.dot(d2, f), d2.sum()]])
        # tiny ridge keeps the system solvable when all scores coincide
        H[0, 0] += 1e-12
        H[1, 1] += 1e-12
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = -g
        slope = float(g @ step)
        if slope >= 0:
            step = -g
            slope = float(g @ step)
        lam = 1.0
        while True:
            A_new, B_new = A + lam * step[0], B + lam * step[1]
            nll_new = sigmoid_nll(A_new, B_new, f, t)
            if nll_new <= nll + 1e-4 * lam * slope or lam < 1e-12:
                break
            lam *= 0.5
        if nll_new > nll:
            converged = True
            break
        moved = lam * np.max(np.abs(step))
        decrease = nll - nll_new
        A, B, nll = A_new, B_new, nll_new
        if moved < step_tol or decrease < nll_tol:
            converged = True
            break
    if not converged:
        log.warning("platt_fit did not converge in %d iterations", max_iter)
    return SigmoidCalibrator(float(A), float(B), converged, it)


# ------------------------------------------------------------------ PAV

@dataclass(frozen=True)
class IsotonicCalibrator:
    """Non-decreasing step function.

    Block ``i`` covers ``(breakpoints[i-1], breakpoints[i]]``; scores at or
    below the first breakpoint take the first value and scores above the last
    breakpoint take the last value.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if not (b.ndim == v.ndim == w.ndim == 1 and b.size == v.size == w.size >= 1):
            raise CalibrationError("isotonic calibrator needs matching non-empty arrays")
        if np.any(np.diff(b) <= 0):
            raise CalibrationError("breakpoints must be strictly increasing")
        if np.any(np.diff(v) < 0):
            raise CalibrationError("block values must be non-decreasing")
        for a in (b, v, w):
            a.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    def __call__(self, s):
        return isotonic_apply(self, s)

    def to_dict(self) -> dict:
        return {"isotonic": {"breakpoints": self.breakpoints.tolist(),
                             "values": self.values.tolist(),
                             "weights": self.weights.tolist()}}


def pav_blocks(values: Sequence[float], weights: Sequence[float]):
    """Pool adjacent violators on an ordered sequence.

    Adjacent blocks are merged while the left mean is >= the right mean, so
    the returned block means are strictly increasing. Returns
    ``(means, weights, sizes)`` where ``sizes`` counts input positions.
    """
    means: list[float] = []
    wts: list[float] = []
    sizes: list[int] = []
    for v, w in zip(values, weights):
        m, wt, sz = float(v), float(w), 1
        while means and means[-1] >= m:
            pw = wts.pop()
            pm = means.pop()
            sz += sizes.pop()
            tot = pw + wt
            m = (pw * pm + wt * m) / tot
            wt = tot
        means.append(m)
        wts.append(wt)
        sizes.append(sz)
    return means, wts, sizes


def pav_fit(cs: CalibrationSet) -> IsotonicCalibrator:
    """Isotonic least-squares fit of targets on scores.

    Examples are sorted by score and tied scores are pooled first, since a
    function of the score cannot separate them.
    """
    if len(cs) == 0:
        raise CalibrationError("empty calibration set")
    order = np.argsort(cs.scores, kind="stable")
    s = cs.scores[order]
    y = cs.targets[order].astype(np.float64)
    uniq, start, counts = np.unique(s, return_index=True, return_counts=True)
    sums = np.add.reduceat(y, start)
    means, wts, sizes = pav_blocks(sums / counts, counts)
    ends = np.cumsum(sizes) - 1
    return IsotonicCalibrator(uniq[ends], np.array(means), np.array(wts))


def isotonic_apply(c: IsotonicCalibrator, s):
    s = np.asarray(s, dtype=np.float64)
    idx = np.searchsorted(c.breakpoints, s, side="left")
    idx = np.minimum(idx, c.values.size - 1)
    return c.values[idx]


def isotonic_fitted_values(c: IsotonicCalibrator, cs: CalibrationSet) -> np.ndarray:
    return isotonic_apply(c, cs.scores)


# ------------------------------------------------------------ CV scores

def cv_staged_scores(d_train: Dataset, cfg: BoostConfig, stages: Sequence[int],
                     n_folds: int = 3, seed: int = 0,
                     use_train_scores: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Out-of-fold normalized scores for several round counts at once.

    For each fold an ensemble of ``cfg.rounds`` rounds is trained on the
    other folds and the held-out fold is scored at every count in ``stages``
    (capped at the stages the fold model actually trained). Returns
    ``(scores, targets)`` with ``scores`` of shape ``(len(stages), n)``,
    ordered by fold and then by position within the fold.

    ``use_train_scores=True`` instead scores the training set with a model
    fit on all of it. That calibration set is biased and is exposed only to
    demonstrate the effect.
    """
    stages = [int(s) for s in stages]
    if use_train_scores:
        e = boost_train(d_train, cfg)
        st = [min(s, e.n_stages) for s in stages]
        return staged_scores(e, d_train.features, st), d_train.labels.copy()
    part = kfold_partition(d_train, n_folds, seed)
    blocks, targets = [], []
    for k in range(n_folds):
        held = part.fold(k)
        fit = d_train.subset(part.complement(k))
        e = boost_train(fit, cfg)
        st = [min(s, e.n_stages) for s in stages]
        blocks.append(staged_scores(e, d_train.features[held], st))
        targets.append(d_train.labels[held])
    return np.concatenate(blocks, axis=1), np.concatenate(targets)


def cv_calibration_scores(d_train: Dataset, cfg: BoostConfig, n_folds: int = 3,
                          seed: int = 0, use_train_scores: bool = False) -> CalibrationSet:
    """Calibration set of out-of-fold ``(f, y)`` pairs covering ``d_train`` once."""
    scores, targets = cv_staged_scores(d_train, cfg, [cfg.rounds], n_folds, seed,
                                       use_train_scores)
    return CalibrationSet(scores[0], targets)


# ---------------------------------------------------------- serialization

def calibrator_to_dict(c) -> Optional[dict]:
    if c is None:
        return None
    if c == "logistic":
        return {"logistic": {}}
    return c.to_dict()


def calibrator_from_dict(obj: Optional[dict]):
    if obj is None:
        return None
    if "sigmoid" in obj:
        return SigmoidCalibrator(float(obj["sigmoid"]["A"]), float(obj["sigmoid"]["B"]))
    if "isotonic" in obj:
        iso = obj["isotonic"]
        values = iso["values"]
        weights = iso.get("weights", [1.0] * len(values))
        return IsotonicCalibrator(np.array(iso["breakpoints"], dtype=np.float64),
                                  np.array(values, dtype=np.float64),
                                  np.array(weights, dtype=np.float64))
    if "logistic" in obj:
        return "logistic"
    raise CalibrationError(f"unknown calibrator {sorted(obj)}")
