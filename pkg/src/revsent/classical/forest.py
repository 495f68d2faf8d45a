from __future__ import annotations

import numpy as np

from revsent.classical.base import Baseline, as_dense
from revsent.classical.tree import TreeArrays, grow_tree


class RandomForest(Baseline):
    """Bagged gini trees with sqrt-feature subsampling at every split."""

    name = "rf"

    def __init__(self, n_trees: int = 100, max_depth: int | None = None, max_features="sqrt",
                 bootstrap: bool = True, seed: int = 0):
        if n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.seed = seed
        self.trees_: list[TreeArrays] = []

    def fit(self, X, y):
        X = as_dense(X)
        y = self._check_fit_input(X, y)
        n = X.shape[0]
        # one child seed per tree keeps trees independent of fitting order
        seeds = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        self.trees_ = []
        for ss in seeds:
            rng = np.random.default_rng(ss)
            samples = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            self.trees_.append(grow_tree(X, y=y, n_classes=self.n_classes_, samples=samples,
                                         max_depth=self.max_depth, max_features=self.max_features,
                                         rng=rng))
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = as_dense(X)
        self._check_predict_input(X)
        out = np.zeros((X.shape[0], self.n_classes_))
        for tree in self.trees_:
            counts = tree.value[tree.apply(X)]
            out += counts / counts.sum(axis=1, keepdims=True)
        return out / len(self.trees_)

    def get_state(self):
        arrays = {}
        for i, tree in enumerate(self.trees_):
            arrays.update(tree.arrays(f"tree{i:03d}."))
        cfg = {"n_trees": self.n_trees, "max_depth": self.max_depth, "max_features": self.max_features,
               "bootstrap": self.bootstrap, "seed": self.seed,
               "n_features": self.n_features_, "n_classes": self.n_classes_}
        return arrays, cfg

    @classmethod
    def from_state(cls, arrays, config):
        m = cls(config["n_trees"], config["max_depth"], config["max_features"], config["bootstrap"],
                config["seed"])
        m.n_features_, m.n_classes_ = config["n_features"], config["n_classes"]
        m.trees_ = [TreeArrays.from_arrays(arrays, f"tree{i:03d}.") for i in range(m.n_trees)]
        return m
