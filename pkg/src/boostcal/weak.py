"""Weak learners for boosting: decision stumps and depth-limited trees.

Both learners emit hard votes in {-1, +1}. A feature value goes to the left
child iff ``x[j] <= threshold``. Candidate thresholds are midpoints between
consecutive distinct sorted values of a feature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .dataset import ShapeError

# Splits whose scores differ by less than this are treated as ties, so the
# lowest (feature, threshold) wins regardless of summation order.
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class Stump:
    feature_index: int
    threshold: float
    left_vote: int
    right_vote: int
    degenerate: bool = False

    def __post_init__(self):
        if self.left_vote not in (-1, 1) or self.right_vote != -self.left_vote:
            raise ValueError("stump votes must be opposite signs in {-1, +1}")

    @property
    def n_features_used(self) -> int:
        return self.feature_index + 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        go_left = X[:, self.feature_index] <= self.threshold
        return np.where(go_left, self.left_vote, self.right_vote).astype(np.int8)


@dataclass(frozen=True)
class Tree:
    """Flat binary tree.

    Node ``i`` is internal when ``feature[i] >= 0``; then ``left[i]`` and
    ``right[i]`` are child node ids. Leaves carry ``vote[i]`` in {-1, +1}.
    Node 0 is the root.
    """

    feature: tuple
    threshold: tuple
    left: tuple
    right: tuple
    vote: tuple
    max_depth: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    @property
    def n_features_used(self) -> int:
        return max(self.feature) + 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold, dtype=np.float64)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        for _ in range(self.max_depth):
            f = feature[node]
            internal = f >= 0
            if not internal.any():
                break
            r = rows[internal]
            n = node[internal]
            go_left = X[r, f[internal]] <= threshold[n]
            node[internal] = np.where(go_left, left[n], right[n])
        return np.asarray(self.vote, dtype=np.int8)[node]


WeakModel = Union[Stump, Tree]


def presort(X: np.ndarray) -> np.ndarray:
    """Per-feature stable argsort, shape ``(d, n)``; reusable across rounds."""
    return np.argsort(X, axis=0, kind="stable").T.copy()


def _check_weights(X, w):
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (X.shape[0],):
        raise ShapeError(f"weights have shape {w.shape}, expected ({X.shape[0]},)")
    return w


def _majority_vote(pos_mass: float, neg_mass: float) -> int:
    # ties vote +1
    return 1 if pos_mass >= neg_mass else -1


def _midpoint(lo: float, hi: float) -> float:
    mid = 0.5 * (lo + hi)
    if not lo <= mid < hi:
        mid = lo
    return mid


def stump_error(stump: Stump, X: np.ndarray, y_signed: np.ndarray, w: np.ndarray) -> float:
    return float(w[stump.predict(X) != y_signed].sum())


def train_stump(X: np.ndarray, y: np.ndarray, w: Sequence[float],
                order: Optional[np.ndarray] = None) -> Stump:
    """Fit the stump with the smallest weighted 0/1 error.

    Parameters
    ----------
    X : ndarray, shape (n, d)
    y : ndarray, shape (n,)
        Labels in {0, 1}.
    w : array-like, shape (n,)
        Positive example weights.
    order : ndarray, optional
        Output of :func:`presort` for ``X``.

    Ties are broken by lowest feature index, then lowest threshold, then a
    left vote of -1 before +1. When every feature is constant the result is a
    degenerate stump that sends everything left and votes the weighted
    majority class.
    """
    X = np.asarray(X, dtype=np.float64)
    w = _check_weights(X, w)
    pos_w = np.where(np.asarray(y) == 1, w, 0.0)
    total = w.sum()
    total_pos = pos_w.sum()
    total_neg = total - total_pos
    if order is None:
        order = presort(X)

    best = None  # (error, feature, threshold, left_vote)
    for j in range(X.shape[1]):
        o = order[j]
        xs = X[o, j]
        cut = np.flatnonzero(xs[:-1] < xs[1:])
        if cut.size == 0:
            continue
        cum_w = np.cumsum(w[o])[cut]
        cum_pos = np.cumsum(pos_w[o])[cut]
        cum_neg = cum_w - cum_pos
        # left -1 / right +1 misclassifies left positives and right negatives
        err_neg_left = cum_pos + (total_neg - cum_neg)
        err_pos_left = cum_neg + (total_pos - cum_pos)
        err_k = np.minimum(err_neg_left, err_pos_left)
        err = float(err_k.min())
        k = int(np.flatnonzero(err_k <= err + _TIE_TOL)[0])
        vote = -1 if err_neg_left[k] <= err + _TIE_TOL else 1
        if best is None or err < best[0] - _TIE_TOL:
            c = cut[k]
            best = (float(err), j, _midpoint(xs[c], xs[c + 1]), vote)

    if best is None:
        vote = _majority_vote(total_pos, total_neg)
        return Stump(0, float("inf"), vote, -vote, degenerate=True)
    _, j, t, vote = best
    return Stump(j, float(t), vote, -vote)


def _gini_scores(cum_w, cum_pos, total_w, total_pos):
    # Weighted Gini of the two children, up to a factor of 2.
    cum_neg = cum_w - cum_pos
    r_w = total_w - cum_w
    r_pos = total_pos - cum_pos
    r_neg = r_w - r_pos
    with np.errstate(divide="ignore", invalid="ignore"):
        left = np.where(cum_w > 0, cum_pos * cum_neg / cum_w, 0.0)
        right = np.where(r_w > 0, r_pos * r_neg / r_w, 0.0)
    return left + right


def train_tree(X: np.ndarray, y: np.ndarray, w: Sequence[float], max_depth: int,
               order: Optional[np.ndarray] = None) -> Tree:
    """Greedy weighted-Gini tree of depth at most ``max_depth``.

    A node becomes a leaf when it is at maximum depth, pure, or has no split
    that lowers its impurity. Leaves vote the sign of the weighted label sum
    (+1 on a tie). Split ties follow :func:`train_stump`: lowest feature,
    then lowest threshold.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    w = _check_weights(X, w)
    pos_w = np.where(np.asarray(y) == 1, w, 0.0)
    if order is None:
        order = presort(X)
    n, d = X.shape

    feature, threshold, left, right, vote = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        vote.append(1)
        return len(feature) - 1

    root = new_node()
    # each work item: node id, depth, per-feature sorted member indices
    stack = [(root, 0, [order[j] for j in range(d)])]
    while stack:
        node, depth, orders = stack.pop()
        members = orders[0]
        w_tot = w[members].sum()
        p_tot = pos_w[members].sum()
        n_tot = w_tot - p_tot
        vote[node] = _majority_vote(p_tot, n_tot)
        if depth >= max_depth or p_tot <= 0.0 or n_tot <= 0.0:
            continue
        parent = p_tot * n_tot / w_tot
        best = None  # (score, feature, threshold)
        for j in range(d):
            o = orders[j]
            xs = X[o, j]
            cut = np.flatnonzero(xs[:-1] < xs[1:])
            if cut.size == 0:
                continue
            scores = _gini_scores(np.cumsum(w[o])[cut], np.cumsum(pos_w[o])[cut],
                                  w_tot, p_tot)
            s = scores.min()
            if best is None or s < best[0] - _TIE_TOL:
                k = int(np.flatnonzero(scores <= s + _TIE_TOL)[0])
                c = cut[k]
                best = (float(s), j, _midpoint(xs[c], xs[c + 1]))
        if best is None or best[0] >= parent - _TIE_TOL * max(1.0, parent):
            continue
        _, j, t = best
        goes_left = np.zeros(n, dtype=bool)
        goes_left[members] = X[members, j] <= t
        l_id, r_id = new_node(), new_node()
        feature[node], threshold[node] = j, t
        left[node], right[node] = l_id, r_id
        l_orders = [o[goes_left[o]] for o in orders]
        r_orders = [o[~goes_left[o]] for o in orders]
        # push right first so the left subtree gets lower node ids
        stack.append((r_id, depth + 1, r_orders))
        stack.append((l_id, depth + 1, l_orders))

    return Tree(tuple(feature), tuple(float(t) for t in threshold), tuple(left),
                tuple(right), tuple(vote), max_depth)


def weak_predict(model: WeakModel, x) -> int:
    """Vote of ``model`` on a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("expected a single feature vector")
    if x.shape[0] < model.n_features_used:
        raise ShapeError(
            f"feature vector has width {x.shape[0]}, model uses {model.n_features_used}")
    return int(model.predict(x.reshape(1, -1))[0])


def predict_batch(model: WeakModel, X: np.ndarray, width: Optional[int] = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError("expected a 2-D feature matrix")
    if width is not None and X.shape[1] != width:
        raise ShapeError(f"feature matrix has width {X.shape[1]}, expected {width}")
    return model.predict(X)


# ------------------------------------------------------------ serialization

def _float_out(v: float):
    return v if np.isfinite(v) else ("inf" if v > 0 else "-inf")


def _float_in(v) -> float:
    return float(v)


def model_to_dict(model: WeakModel) -> dict:
    if isinstance(model, Stump):
        return {"type": "stump", "feature_index": model.feature_index,
                "threshold": _float_out(model.threshold),
                "left_vote": model.left_vote, "right_vote": model.right_vote,
                "degenerate": model.degenerate}
    return {"type": "tree", "max_depth": model.max_depth,
            "feature": list(model.feature), "threshold": list(model.threshold),
            "left": list(model.left), "right": list(model.right),
            "vote": list(model.vote)}


def model_from_dict(obj: dict) -> WeakModel:
    kind = obj["type"]
    if kind == "stump":
        return Stump(int(obj["feature_index"]), _float_in(obj["threshold"]),
                     int(obj["left_vote"]), int(obj["right_vote"]),
                     bool(obj.get("degenerate", False)))
    if kind == "tree":
        return Tree(tuple(int(v) for v in obj["feature"]),
                    tuple(float(v) for v in obj["threshold"]),
                    tuple(int(v) for v in obj["left"]),
                    tuple(int(v) for v in obj["right"]),
                    tuple(int(v) for v in obj["vote"]),
                    int(obj["max_depth"]))
    raise ValueError(f"unknown weak model type {kind!r}")
