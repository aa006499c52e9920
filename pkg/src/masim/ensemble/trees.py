"""Depth-limited CART trees (Gini classification, variance regression).

Split search goes through :mod:`masim.kernels`; the tree structure and
training loop live here. Trees are stored as flat arrays so they can be
serialized and compared for structural identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .. import kernels

# gains this far below zero are rounding noise; zero-gain splits are kept so
# XOR-like structure is reachable one level down
_GAIN_SLACK = 1e-12


@dataclass(frozen=True)
class WeakLearnerParams:
    max_depth: int = 4
    min_leaf: int = 2
    max_features: float | None = None  # fraction of columns tried per node; None = all

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.max_features is not None and not 0.0 < self.max_features <= 1.0:
            raise ValueError("max_features must be in (0, 1]")


@dataclass
class Tree:
    """Flat-array binary tree. ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # class index (classification) or mean (regression)
    n_features: int
    importances: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kernels.apply_tree(X, self.feature, self.threshold, self.left, self.right)

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def serialize(self) -> str:
        """Canonical JSON form; equal strings mean structurally identical trees."""
        return json.dumps(
            {
                "feature": self.feature.tolist(),
                "threshold": [float(t).hex() for t in self.threshold],
                "left": self.left.tolist(),
                "right": self.right.tolist(),
                "value": [float(v).hex() for v in self.value],
            },
            separators=(",", ":"),
        )


def _grow(X, y, split_fn, leaf_fn, params: WeakLearnerParams, rng, n_total):
    n, d = X.shape
    if params.max_features is None:
        n_try = d
    else:
        n_try = max(1, int(round(params.max_features * d)))
    feature, threshold, left, right, value = [], [], [], [], []
    importances = np.zeros(d)

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(leaf_fn(idx))
        return len(feature) - 1

    root = new_node(np.arange(n, dtype=np.intp))
    stack = [(root, np.arange(n, dtype=np.intp), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= params.max_depth or idx.shape[0] < 2 * params.min_leaf:
            continue
        if np.all(y[idx] == y[idx[0]]):
            continue
        feats = rng.permutation(d)[:n_try].astype(np.intp)
        f, thr, gain = split_fn(idx, feats)
        if f < 0 or gain < -_GAIN_SLACK:
            continue
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node] = int(f)
        threshold[node] = float(thr)
        importances[f] += max(gain, 0.0) / n_total
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(
        feature=np.asarray(feature, dtype=np.intp),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.intp),
        right=np.asarray(right, dtype=np.intp),
        value=np.asarray(value),
        n_features=d,
        importances=importances,
    )


def fit_classifier(X, y, n_classes: int, params: WeakLearnerParams, rng) -> Tree:
    """Gini tree on integer labels ``0..n_classes-1``.

    ``rng`` only orders the candidate features at each node, which decides
    between splits of exactly equal gain. Single-class data yields a
    one-leaf constant tree.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.intp)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError("labels must lie in 0..n_classes-1")

    Xt = np.ascontiguousarray(X.T)

    def split_fn(idx, feats):
        return kernels.best_split_gini(Xt, y, n_classes, idx, feats, params.min_leaf)

    def leaf_fn(idx):
        counts = np.bincount(y[idx], minlength=n_classes)
        return int(np.argmax(counts))  # ties -> smallest class index

    tree = _grow(X, y, split_fn, leaf_fn, params, rng, max(len(y), 1))
    tree.value = tree.value.astype(np.intp)
    return tree


def fit_regressor(X, y, params: WeakLearnerParams, rng) -> Tree:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)

    Xt = np.ascontiguousarray(X.T)

    def split_fn(idx, feats):
        return kernels.best_split_mse(Xt, y, idx, feats, params.min_leaf)

    def leaf_fn(idx):
        return float(y[idx].mean())

    tree = _grow(X, y, split_fn, leaf_fn, params, rng, max(len(y), 1))
    tree.value = tree.value.astype(np.float64)
    return tree


def forest_importances(X, y, n_trees: int, params: WeakLearnerParams, rng, bootstrap: bool = True):
    """Mean impurity-decrease importance over a bagged regression forest."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    total = np.zeros(X.shape[1])
    for _ in range(n_trees):
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        tree = fit_regressor(X[rows], y[rows], params, rng)
        total += tree.importances
    return total / n_trees


@dataclass
class WeakLearner:
    """A classification tree plus the label values its class indices stand for."""

    tree: Tree
    classes: np.ndarray

    def predict(self, X) -> np.ndarray:
        return self.classes[self.tree.predict(X)]


def train_weak_learner(data, params: WeakLearnerParams, rng) -> WeakLearner:
    """Fit a Gini tree to a :class:`LabeledDataset` with arbitrary label values."""
    classes, codes = np.unique(data.labels, return_inverse=True)
    tree = fit_classifier(data.features, codes.astype(np.intp), max(len(classes), 1), params, rng)
    return WeakLearner(tree, classes)
