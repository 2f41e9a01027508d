"""Seeded synthetic binary tasks with known class posteriors."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .dataset import Dataset, make_rng


def make_gaussians(n: int, n_features: int = 2, separation: float = 2.0,
                   seed: int = 0) -> Dataset:
    """Two overlapping unit-covariance Gaussians.

    Classes are balanced in expectation; the positive mean is shifted by
    ``separation`` along every axis.
    """
    rng = make_rng(seed)
    y = rng.integers(0, 2, size=n)
    X = rng.standard_normal((n, n_features)) + separation * y[:, None]
    return Dataset(X, y, "gaussians")


def gaussians_posterior(X: np.ndarray, separation: float = 2.0) -> np.ndarray:
    # log-odds of N(s*1, I) vs N(0, I) with equal priors
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    return expit(separation * X.sum(axis=1) - 0.5 * d * separation ** 2)


def _additive_logit(X: np.ndarray) -> np.ndarray:
    terms = [
        2.0 * X[:, 0],
        1.5 * np.sin(np.pi * X[:, 1]),
        np.where(X[:, 2] > 0.3, 1.2, -0.8),
        -2.0 * X[:, 3] ** 2 + 0.6,
    ]
    return np.sum(terms[: X.shape[1]], axis=0)


def make_additive(n: int, n_features: int = 4, seed: int = 0) -> Dataset:
    """Features uniform on [-1, 1]; the log-odds is a sum of one-feature terms.

    Extra features beyond the fourth are pure noise.
    """
    rng = make_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, n_features))
    p = additive_posterior(X)
    y = (rng.uniform(size=n) < p).astype(np.int64)
    return Dataset(X, y, "additive")


def additive_posterior(X: np.ndarray) -> np.ndarray:
    return expit(_additive_logit(np.asarray(X, dtype=np.float64)[:, :4]))


GENERATORS = {
    "gaussians": make_gaussians,
    "additive": make_additive,
}


def make_synthetic(name: str, n: int, seed: int = 0) -> Dataset:
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown synthetic task {name!r}; "
                         f"choose from {sorted(GENERATORS)}") from None
    return gen(n, seed=seed)
