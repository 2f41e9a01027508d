"""Discrete AdaBoost and its log-loss variant over stumps or trees."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit

from .dataset import Dataset, ShapeError
from .weak import model_from_dict, model_to_dict, presort, train_stump, train_tree

log = logging.getLogger(__name__)

LOSSES = ("exponential", "logloss")


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class BaseSpec:
    """Weak learner family: ``"stump"`` or ``"tree"`` with a depth limit."""

    kind: str = "stump"
    max_depth: int = 1

    def __post_init__(self):
        if self.kind not in ("stump", "tree"):
            raise ValueError(f"unknown base learner {self.kind!r}")
        if self.kind == "stump" and self.max_depth != 1:
            object.__setattr__(self, "max_depth", 1)
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "max_depth": self.max_depth}


@dataclass(frozen=True)
class BoostConfig:
    rounds: int = 100
    loss: str = "exponential"
    base: BaseSpec = field(default_factory=BaseSpec)
    epsilon_err: float = 1e-6

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if not 0.0 < self.epsilon_err < 0.5:
            raise ValueError("epsilon_err must be in (0, 0.5)")


def stage_weight(err: float, epsilon_err: float = 1e-6) -> float:
    """AdaBoost stage weight ``0.5 * ln((1 - err) / err)`` with ``err`` clamped."""
    err = min(max(err, epsilon_err), 1.0 - epsilon_err)
    return 0.5 * np.log((1.0 - err) / err)


@dataclass
class BoostedEnsemble:
    """Weak models with non-negative stage weights, in training order."""

    models: list
    alphas: np.ndarray
    loss: str
    base: BaseSpec
    n_features: int
    stop_reason: str = "max_rounds"
    # per-round history, filled during training only
    train_errors: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=np.float64)
        if len(self.models) < 1 or len(self.models) != self.alphas.size:
            raise ValueError("ensemble needs at least one stage and one alpha per model")
        if np.any(self.alphas < 0):
            raise ValueError("stage weights must be non-negative")

    def __len__(self) -> int:
        return len(self.models)

    @property
    def n_stages(self) -> int:
        return len(self.models)

    @property
    def alpha_sum(self) -> float:
        return float(self.alphas.sum())

    @property
    def degenerate(self) -> bool:
        return self.alpha_sum == 0.0

    def _matrix(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(
                f"expected feature width {self.n_features}, got shape {X.shape}")
        return X

    def votes(self, X) -> np.ndarray:
        """Stage votes in {-1, +1}, shape ``(n_stages, n)``."""
        X = self._matrix(X)
        return np.stack([m.predict(X) for m in self.models])

    def raw_score(self, X) -> np.ndarray:
        """``F(x) = sum_i alpha_i h_i(x)`` for each row of ``X``."""
        return self.alphas @ self.votes(X)

    def normalized_score(self, X) -> np.ndarray:
        """``f(x) = sum_i alpha_i h'_i(x) / sum_i alpha_i`` with ``h' = (h+1)/2``.

        Returns 0.5 everywhere when all stage weights are zero.
        """
        H = self.votes(X)
        S = self.alpha_sum
        if S == 0.0:
            return np.full(H.shape[1], 0.5)
        return (self.alphas @ ((H + 1) // 2)) / S

    def probability(self, X) -> np.ndarray:
        """The ensemble's own probability estimate before any calibration.

        Exponential-loss ensembles report ``f``; log-loss ensembles report
        ``1 / (1 + exp(-F))``, the probability their loss is fitted to.
        """
        if self.loss == "logloss":
            return expit(self.raw_score(X))
        return self.normalized_score(X)

    def truncated(self, k: int) -> "BoostedEnsemble":
        if not 1 <= k <= self.n_stages:
            raise IndexError(f"stage {k} out of range 1..{self.n_stages}")
        return BoostedEnsemble(self.models[:k], self.alphas[:k], self.loss,
                               self.base, self.n_features, self.stop_reason)

    def to_dict(self) -> dict:
        return {"loss": self.loss, "base": self.base.to_dict(),
                "n_features": self.n_features, "stop_reason": self.stop_reason,
                "stages": [{"alpha": float(a), "model": model_to_dict(m)}
                           for a, m in zip(self.alphas, self.models)]}

    @classmethod
    def from_dict(cls, obj: dict) -> "BoostedEnsemble":
        stages = obj["stages"]
        return cls([model_from_dict(s["model"]) for s in stages],
                   np.array([float(s["alpha"]) for s in stages]),
                   obj["loss"], BaseSpec(**obj["base"]), int(obj["n_features"]),
                   obj.get("stop_reason", "max_rounds"))


def ensemble_raw_score(e: BoostedEnsemble, x) -> float:
    return float(e.raw_score(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def ensemble_normalized_score(e: BoostedEnsemble, x) -> float:
    return float(e.normalized_score(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def _example_weights(margin: np.ndarray, loss: str) -> np.ndarray:
    """Normalized example weights from the current margins ``y~ * F``."""
    if loss == "exponential":
        # exp(-margin), shifted so the largest weight is 1 before normalizing
        z = -margin
        w = np.exp(z - z.max())
    else:
        w = expit(-margin)
    return w / w.sum()


def boost_train(d: Dataset, cfg: BoostConfig,
                callback: Optional[Callable] = None) -> BoostedEnsemble:
    """Train a boosted ensemble.

    Each round fits the weak learner on the current weights, computes its
    weighted error ``eps`` and stage weight ``0.5 * ln((1 - eps) / eps)``
    (``eps`` clamped to ``[epsilon_err, 1 - epsilon_err]``), then reweights
    examples from the updated ensemble score ``F``:

    * exponential loss: ``w_i ~ exp(-y~_i F(x_i))``, the AdaBoost update;
    * log-loss: ``w_i ~ 1 / (1 + exp(y~_i F(x_i)))``.

    Training stops early after a zero-error round (that stage is kept) or
    when the best learner has error >= 0.5 (that stage is dropped unless it
    would be the only one).

    ``callback(t, model, err, weights_before, weights_after)`` is invoked
    after every completed reweighting round.
    """
    if d.n_positive == 0 or d.n_negative == 0:
        raise TrainingError("boosting needs both classes in the training set")
    X, y = d.features, d.labels
    ys = d.signed_labels
    n = len(d)
    order = presort(X)

    models, alphas, errors = [], [], []
    F = np.zeros(n)
    w = np.full(n, 1.0 / n)
    stop = "max_rounds"
    for t in range(cfg.rounds):
        if cfg.base.kind == "stump":
            h = train_stump(X, y, w, order=order)
            degenerate = h.degenerate
        else:
            h = train_tree(X, y, w, cfg.base.max_depth, order=order)
            degenerate = h.n_nodes == 1
        pred = h.predict(X)
        err = float(w[pred != ys].sum())
        if err >= 0.5 - 1e-12:
            if not models:
                models.append(h)
                alphas.append(max(0.0, stage_weight(err, cfg.epsilon_err)))
                errors.append(err)
            stop = "degenerate" if degenerate else "no_better_than_chance"
            break
        alpha = stage_weight(err, cfg.epsilon_err)
        models.append(h)
        alphas.append(alpha)
        errors.append(err)
        if err <= 0.0:
            stop = "zero_error"
            break
        F += alpha * pred
        w_prev = w
        w = _example_weights(ys * F, cfg.loss)
        if callback is not None:
            callback(t, h, err, w_prev, w)
    if stop != "max_rounds":
        log.debug("boosting stopped after %d rounds: %s", len(models), stop)
    e = BoostedEnsemble(models, np.array(alphas), cfg.loss, cfg.base,
                        d.n_features, stop)
    e.train_errors = errors
    return e


def staged_scores(e: BoostedEnsemble, X, stages: Sequence[int],
                  kind: str = "normalized", votes: Optional[np.ndarray] = None) -> np.ndarray:
    """Scores of the first ``stages[r]`` stages, one row per requested count.

    ``kind`` selects ``"normalized"`` (f) or ``"raw"`` (F). A single pass of
    prefix sums over the stage votes serves every row. Precomputed ``votes``
    from :meth:`BoostedEnsemble.votes` may be passed in.
    """
    if isinstance(X, Dataset):
        X = X.features
    stages = [int(s) for s in stages]
    for s in stages:
        if not 1 <= s <= e.n_stages:
            raise IndexError(f"stage {s} out of range 1..{e.n_stages}")
    H = e.votes(X) if votes is None else votes
    a = e.alphas[:, None]
    if kind == "raw":
        prefix = np.cumsum(a * H, axis=0)
        return prefix[np.array(stages) - 1]
    if kind != "normalized":
        raise ValueError(f"unknown score kind {kind!r}")
    num = np.cumsum(a * ((H + 1) // 2), axis=0)
    den = np.cumsum(e.alphas)
    rows = np.array(stages) - 1
    out = np.empty((len(stages), H.shape[1]))
    for r, k in enumerate(rows):
        out[r] = num[k] / den[k] if den[k] > 0 else 0.5
    return out


def effective_stages(e: BoostedEnsemble, grid: Sequence[int]) -> list[int]:
    """Map requested round counts onto an ensemble that may have stopped early."""
    return [min(int(g), e.n_stages) for g in grid]
