"""Gradient boosting with regression trees.

Binary targets use the logistic loss with one tree per round; more classes
use the softmax cross-entropy with one tree per class per round.  Tree
structure is fit to the negative gradient by mse splits and each leaf gets
a single Newton step, sum(g) / sum(h), shrunk by the learning rate.  The
shrinkage is halved for a round whenever the full shrunk step would raise
the training loss, which keeps ``loss_history_`` non-increasing.
"""

from __future__ import annotations

import warnings

import numpy as np

from revsent.classical.base import Baseline, as_dense
from revsent.classical.tree import TreeArrays, grow_tree

_HESS_FLOOR = 1e-12


def _softmax(f: np.ndarray) -> np.ndarray:
    z = f - f.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_loss(f: np.ndarray, y: np.ndarray, binary: bool) -> float:
    if binary:
        # log(1 + e^f) - y f, computed stably
        return float(np.mean(np.logaddexp(0.0, f[:, 0]) - y * f[:, 0]))
    z = f - f.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-np.mean(logp[np.arange(y.size), y]))


class GradientBoosting(Baseline):
    name = "gb"

    def __init__(self, n_rounds: int = 100, learning_rate: float = 0.1, max_depth: int = 5,
                 feature_fraction: float = 0.5, seed: int = 0):
        if not 0.0 < feature_fraction <= 1.0:
            raise ValueError("feature_fraction must be in (0, 1]")
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.feature_fraction = feature_fraction
        self.seed = seed
        self.init_: np.ndarray | None = None
        self.trees_: list[list[TreeArrays]] = []
        self.loss_history_: list[float] = []
        self.constant_: int | None = None

    def _n_outputs(self) -> int:
        return 1 if self.n_classes_ == 2 else self.n_classes_

    def fit(self, X, y):
        X = as_dense(X)
        y = self._check_fit_input(X, y)
        self.trees_, self.loss_history_, self.constant_ = [], [], None
        if np.unique(y).size == 1:
            warnings.warn("gradient boosting fit on a single class; predicting a constant", stacklevel=2)
            self.constant_ = int(y[0])
            self.n_classes_ = max(self.n_classes_, 2)
            return self
        n, k = y.size, self._n_outputs()
        binary = k == 1
        counts = np.bincount(y, minlength=self.n_classes_).astype(np.float64)
        prior = np.clip(counts / n, 1e-12, None)
        self.init_ = np.array([np.log(prior[1] / prior[0])]) if binary else np.log(prior)
        f = np.tile(self.init_, (n, 1))
        onehot = np.eye(self.n_classes_)[y]
        rng = np.random.default_rng(self.seed)
        self.loss_history_.append(_log_loss(f, y, binary))
        for _ in range(self.n_rounds):
            if binary:
                p = 1.0 / (1.0 + np.exp(-f))
                resid = y[:, None] - p
            else:
                p = _softmax(f)
                resid = onehot - p
            hess = p * (1.0 - p)
            round_trees = []
            for c in range(k):
                tree = grow_tree(X, target=resid[:, c], max_depth=self.max_depth,
                                 max_features=self.feature_fraction, rng=rng)
                leaves = tree.apply(X)
                g = np.bincount(leaves, weights=resid[:, c], minlength=tree.node_count)
                h = np.bincount(leaves, weights=hess[:, c], minlength=tree.node_count)
                step = g / np.maximum(h, _HESS_FLOOR)
                if k > 1:
                    step *= (k - 1) / k
                tree.value = step[:, None]
                round_trees.append(tree)
            delta = np.column_stack([t.value[t.apply(X), 0] for t in round_trees])
            # Backtrack the shrinkage if a damped Newton step would raise the loss.
            scale, prev = self.learning_rate, self.loss_history_[-1]
            for _ in range(50):
                loss = _log_loss(f + scale * delta, y, binary)
                if loss <= prev:
                    break
                scale *= 0.5
            else:
                scale, loss = 0.0, prev
            f += scale * delta
            for tree in round_trees:
                tree.value = tree.value * scale
            self.trees_.append(round_trees)
            self.loss_history_.append(loss)
        return self

    def decision_function(self, X) -> np.ndarray:
        X = as_dense(X)
        self._check_predict_input(X)
        f = np.tile(self.init_, (X.shape[0], 1))
        for round_trees in self.trees_:
            for c, tree in enumerate(round_trees):
                f[:, c] += tree.value[tree.apply(X), 0]
        return f

    def predict_proba(self, X) -> np.ndarray:
        if self.constant_ is not None:
            X = as_dense(X)
            self._check_predict_input(X)
            out = np.zeros((X.shape[0], self.n_classes_))
            out[:, self.constant_] = 1.0
            return out
        f = self.decision_function(X)
        if self._n_outputs() == 1:
            p1 = 1.0 / (1.0 + np.exp(-f[:, 0]))
            return np.column_stack([1.0 - p1, p1])
        return _softmax(f)

    def get_state(self):
        arrays = {}
        if self.init_ is not None:
            arrays["init"] = self.init_
        for r, round_trees in enumerate(self.trees_):
            for c, tree in enumerate(round_trees):
                arrays.update(tree.arrays(f"round{r:04d}.class{c}."))
        cfg = {"n_rounds": self.n_rounds, "learning_rate": self.learning_rate, "max_depth": self.max_depth,
               "feature_fraction": self.feature_fraction, "seed": self.seed,
               "n_features": self.n_features_, "n_classes": self.n_classes_,
               "constant": self.constant_, "fitted_rounds": len(self.trees_),
               "loss_history": [float.hex(v) for v in self.loss_history_]}
        return arrays, cfg

    @classmethod
    def from_state(cls, arrays, config):
        m = cls(config["n_rounds"], config["learning_rate"], config["max_depth"],
                config["feature_fraction"], config["seed"])
        m.n_features_, m.n_classes_ = config["n_features"], config["n_classes"]
        m.constant_ = config["constant"]
        m.loss_history_ = [float.fromhex(v) for v in config["loss_history"]]
        m.init_ = arrays.get("init")
        k = m._n_outputs()
        m.trees_ = [[TreeArrays.from_arrays(arrays, f"round{r:04d}.class{c}.") for c in range(k)]
                    for r in range(config["fitted_rounds"])]
        return m
