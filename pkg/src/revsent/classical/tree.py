"""CART trees stored as flat node arrays (classification: gini, regression: mse)."""

from __future__ import annotations

import math

import numpy as np

from revsent.classical import splitter
from revsent.classical.base import Baseline, as_dense

LEAF = -1


class TreeArrays:
    """Flattened tree.  ``value`` rows hold class counts or a leaf value."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)

    @property
    def node_count(self) -> int:
        return self.feature.size

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index for each row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            n = node[active]
            go_left = X[active, self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def arrays(self, prefix: str) -> dict:
        return {f"{prefix}feature": self.feature, f"{prefix}threshold": self.threshold,
                f"{prefix}left": self.left, f"{prefix}right": self.right, f"{prefix}value": self.value}

    @classmethod
    def from_arrays(cls, arrays, prefix: str) -> "TreeArrays":
        return cls(*(arrays[f"{prefix}{k}"] for k in ("feature", "threshold", "left", "right", "value")))


def _n_split_features(max_features, d: int) -> int:
    if max_features is None:
        return d
    if max_features == "sqrt":
        return max(1, int(math.sqrt(d)))
    if isinstance(max_features, float):
        return max(1, int(max_features * d))
    return max(1, min(d, int(max_features)))


def grow_tree(X, *, y=None, n_classes=None, target=None, samples=None, max_depth=None,
              min_samples_split=2, max_features=None, rng=None, backend=None) -> TreeArrays:
    """Grow a tree depth-first.

    Pass ``y``/``n_classes`` for a gini classification tree (leaf value =
    class counts) or ``target`` for an mse regression tree (leaf value =
    mean).  ``samples`` may repeat indices (bootstrap).  When a random
    feature subset yields no valid split the remaining features are tried,
    so subsampling never stops growth early.  ``backend`` overrides the
    split-search module chosen at import.
    """
    classify = y is not None
    search = splitter if backend is None else backend
    n, d = X.shape
    samples = np.arange(n, dtype=np.int64) if samples is None else np.asarray(samples, dtype=np.int64)
    k = _n_split_features(max_features, d)
    rng = rng if rng is not None else np.random.default_rng(0)

    feature, threshold, left, right, value = [], [], [], [], []

    def leaf_value(idx):
        if classify:
            return np.bincount(y[idx], minlength=n_classes).astype(np.float64)
        return np.array([target[idx].mean()])

    def is_pure(idx):
        vals = y[idx] if classify else target[idx]
        return bool(np.all(vals == vals[0]))

    def find(idx):
        if k >= d:
            order = [np.arange(d, dtype=np.int64)]
        else:
            perm = rng.permutation(d).astype(np.int64)
            order = [np.sort(perm[:k]), np.sort(perm[k:])]
        for feats in order:
            if classify:
                f, t, _ = search.best_split_gini(X, y, n_classes, idx, feats)
            else:
                f, t, _ = search.best_split_mse(X, target, idx, feats)
            if f >= 0:
                return f, t
        return -1, np.nan

    stack = [(samples, 0, -1, False)]
    while stack:
        idx, depth, parent, is_right = stack.pop()
        node = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = node
        feature.append(LEAF)
        threshold.append(np.nan)
        left.append(LEAF)
        right.append(LEAF)
        value.append(leaf_value(idx))
        if idx.size < min_samples_split or (max_depth is not None and depth >= max_depth) or is_pure(idx):
            continue
        f, t = find(idx)
        if f < 0:
            continue
        feature[node], threshold[node] = f, t
        mask = X[idx, f] <= t
        # push right first so the left subtree is numbered first
        stack.append((idx[~mask], depth + 1, node, True))
        stack.append((idx[mask], depth + 1, node, False))
    return TreeArrays(feature, threshold, left, right, np.vstack(value))


class DecisionTree(Baseline):
    """Gini CART classifier, unlimited depth by default."""

    name = "dt"

    def __init__(self, max_depth: int | None = None, max_features=None, seed: int = 0):
        self.max_depth = max_depth
        self.max_features = max_features
        self.seed = seed
        self.tree_: TreeArrays | None = None

    def fit(self, X, y, samples=None, rng=None):
        X = as_dense(X)
        y = self._check_fit_input(X, y)
        self.tree_ = grow_tree(X, y=y, n_classes=self.n_classes_, samples=samples,
                               max_depth=self.max_depth, max_features=self.max_features,
                               rng=rng if rng is not None else np.random.default_rng(self.seed))
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = as_dense(X)
        self._check_predict_input(X)
        counts = self.tree_.value[self.tree_.apply(X)]
        return counts / counts.sum(axis=1, keepdims=True)

    def get_state(self):
        cfg = {"max_depth": self.max_depth, "max_features": self.max_features, "seed": self.seed,
               "n_features": self.n_features_, "n_classes": self.n_classes_}
        return self.tree_.arrays("tree."), cfg

    @classmethod
    def from_state(cls, arrays, config):
        m = cls(config["max_depth"], config["max_features"], config["seed"])
        m.n_features_, m.n_classes_ = config["n_features"], config["n_classes"]
        m.tree_ = TreeArrays.from_arrays(arrays, "tree.")
        return m
