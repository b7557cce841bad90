"""CART regression trees and bootstrap-aggregated forests."""
from __future__ import annotations

from typing import Callable

import numpy as np

from ..numerics import RngStream, bootstrap_sample
from ..series import SupervisedMatrix
from .base import FittedBase, MultivariateSpec, arr

LEAF = -1


def _best_split(X: np.ndarray, y: np.ndarray, features: np.ndarray, min_leaf: int):
    """Exhaustive variance-reduction search; returns (feature, threshold, sse) or None.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values. Ties keep the earliest feature in ``features`` and the lowest threshold.
    """
    n = y.size
    best = None
    best_sse = np.inf
    for j in features:
        order = np.argsort(X[:, j], kind="mergesort")
        xs = X[order, j]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        total, total_sq = csum[-1], csq[-1]
        # split after position i (left = 0..i)
        i = np.arange(min_leaf - 1, n - min_leaf)
        if i.size == 0:
            continue
        valid = xs[i] < xs[i + 1]
        if not np.any(valid):
            continue
        i = i[valid]
        nl = i + 1.0
        nr = n - nl
        sl = csum[i]
        sse = (csq[i] - sl * sl / nl) + ((total_sq - csq[i]) - (total - sl) ** 2 / nr)
        k = int(np.argmin(sse))
        if sse[k] < best_sse - 1e-12 * max(1.0, abs(best_sse) if np.isfinite(best_sse) else 1.0):
            best_sse = float(sse[k])
            pos = i[k]
            best = (int(j), float(0.5 * (xs[pos] + xs[pos + 1])), best_sse)
    return best


class FittedTree(FittedBase):
    kind = "decision_tree"

    def __init__(self, params, width, feature, threshold, left, right, value, seed=0):
        self.params = dict(params)
        self.width = int(width)
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.seed = seed

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        out = np.empty(X.shape[0])
        for r in range(X.shape[0]):
            node = 0
            while self.feature[node] != LEAF:
                node = self.left[node] if X[r, self.feature[node]] <= self.threshold[node] else self.right[node]
            out[r] = self.value[node]
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hyperparameters": self.params, "seed": self.seed,
                "parameters": {"width": self.width, "feature": self.feature.tolist(), "threshold": arr(self.threshold),
                               "left": self.left.tolist(), "right": self.right.tolist(), "value": arr(self.value)}}

    @classmethod
    def from_dict(cls, doc):
        q = doc["parameters"]
        return cls(doc["hyperparameters"], q["width"], q["feature"], q["threshold"], q["left"], q["right"], q["value"], doc["seed"])


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int | None = None,
    min_leaf: int = 1,
    feature_sampler: Callable[[], np.ndarray] | None = None,
    params: dict | None = None,
    seed: int = 0,
) -> FittedTree:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    min_leaf = max(1, int(min_leaf))
    all_features = np.arange(p)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(np.mean(y[idx])))
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        if idx.size < 2 * min_leaf:
            continue
        ys = y[idx]
        if np.all(ys == ys[0]):
            continue
        cand = feature_sampler() if feature_sampler is not None else all_features
        split = _best_split(X[idx], ys, cand, min_leaf)
        if split is None:
            continue
        j, thr, sse = split
        parent_sse = float(np.sum((ys - ys.mean()) ** 2))
        if not sse < parent_sse:
            continue
        mask = X[idx, j] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = j, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is expanded first (stable node numbering)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return FittedTree(params or {"max_depth": max_depth, "min_leaf": min_leaf}, p, feature, threshold, left, right, value, seed)


def fit_tree(spec: MultivariateSpec, sm: SupervisedMatrix) -> FittedTree:
    q = spec.params
    return grow_tree(sm.X, sm.y, q["max_depth"], q["min_leaf"], params=q, seed=spec.seed)


class FittedForest(FittedBase):
    kind = "rfr"

    def __init__(self, params, trees, bootstrap_indices, m, seed=0):
        self.params = dict(params)
        self.trees = list(trees)
        self.bootstrap_indices = [np.asarray(b, dtype=np.int64) for b in bootstrap_indices]
        self.m = int(m)
        self.seed = seed
        self.width = self.trees[0].width

    def tree_predictions(self, X) -> np.ndarray:
        X = self._check(X)
        return np.stack([t.predict(X) for t in self.trees])

    def predict(self, X) -> np.ndarray:
        return np.mean(self.tree_predictions(X), axis=0)

    def to_dict(self) -> dict:
        return {"kind": "rfr", "hyperparameters": self.params, "seed": self.seed,
                "parameters": {"m": self.m, "trees": [t.to_dict() for t in self.trees],
                               "bootstrap_indices": [b.tolist() for b in self.bootstrap_indices]}}

    @classmethod
    def from_dict(cls, doc):
        q = doc["parameters"]
        return cls(doc["hyperparameters"], [FittedTree.from_dict(t) for t in q["trees"]], q["bootstrap_indices"], q["m"], doc["seed"])


def resolve_m(m, n_features: int) -> int:
    if m is None:
        return max(1, n_features // 3)
    m = int(m)
    if not 1 <= m <= n_features:
        raise ValueError(f"m={m} must lie in 1..{n_features}")
    return m


def fit_forest(spec: MultivariateSpec, sm: SupervisedMatrix) -> FittedForest:
    """B trees on bootstrap resamples, each split drawing ``m`` candidate features.

    Tree b draws its resample and split subsets from the stream
    ``RngStream(seed, "rfr/tree/<b>")`` so trees are order-independent.
    """
    q = spec.params
    n, p = sm.X.shape
    m = resolve_m(q["m"], p)
    root = RngStream(spec.seed, "rfr")
    trees, boots = [], []
    for b in range(int(q["n_trees"])):
        stream = root.child(f"tree/{b}")
        idx = bootstrap_sample(n, stream.child("bootstrap")) if q["bootstrap"] else np.arange(n)
        if m == p:
            sampler = None
        else:
            gen = stream.child("features").generator()
            sampler = lambda gen=gen: np.sort(gen.choice(p, size=m, replace=False))
        trees.append(grow_tree(sm.X[idx], sm.y[idx], q["max_depth"], q["min_leaf"], sampler, params=q, seed=spec.seed))
        boots.append(idx)
    return FittedForest(q, trees, boots, m, spec.seed)
