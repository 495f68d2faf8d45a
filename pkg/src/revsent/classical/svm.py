"""Linear SVM trained with mini-batch Pegasos.

The primal objective is ``lam/2 ||w||^2 + mean(hinge)`` with
``lam = 1 / (C * n)``, so larger C means weaker regularisation as in the
usual soft-margin formulation.  The bias is an appended constant feature.
"""

from __future__ import annotations

import warnings

import numpy as np

from revsent.classical.base import Baseline, as_dense, as_matrix


class LinearSvm(Baseline):
    name = "svm"
    has_proba = False

    def __init__(self, C: float = 1.0, n_epochs: int = 10, batch_size: int = 32, seed: int = 0):
        if C <= 0:
            raise ValueError("C must be positive")
        self.C = C
        self.n_epochs = n_epochs
        self.batch_size = batch_size
        self.seed = seed
        self.coef_: np.ndarray | None = None  # (n_outputs, d + 1), last column is the bias
        self.constant_: int | None = None

    def _fit_binary(self, X, s: np.ndarray, rng) -> np.ndarray:
        n, d = X.shape
        lam = 1.0 / (self.C * n)
        w = np.zeros(d + 1)
        radius = 1.0 / np.sqrt(lam)
        t = 0
        for _ in range(self.n_epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                b = order[start:start + self.batch_size]
                xb = as_dense(X[b])
                xb = np.hstack([xb, np.ones((xb.shape[0], 1))])
                t += 1
                eta = 1.0 / (lam * t)
                viol = s[b] * (xb @ w) < 1.0
                w *= 1.0 - eta * lam
                if viol.any():
                    w += (eta / b.size) * (s[b][viol] @ xb[viol])
                norm = np.linalg.norm(w)
                if norm > radius:
                    w *= radius / norm
        return w

    def fit(self, X, y):
        X = as_matrix(X)
        y = self._check_fit_input(X, y)
        self.constant_ = None
        if np.unique(y).size == 1:
            warnings.warn("linear SVM fit on a single class; predicting a constant", stacklevel=2)
            self.constant_ = int(y[0])
            self.n_classes_ = max(self.n_classes_, 2)
            self.coef_ = np.zeros((1, X.shape[1] + 1))
            return self
        rng = np.random.default_rng(self.seed)
        if self.n_classes_ == 2:
            self.coef_ = self._fit_binary(X, np.where(y == 1, 1.0, -1.0), rng)[None, :]
        else:
            self.coef_ = np.vstack([self._fit_binary(X, np.where(y == c, 1.0, -1.0), rng)
                                    for c in range(self.n_classes_)])
        return self

    def decision_function(self, X) -> np.ndarray:
        X = as_matrix(X)
        self._check_predict_input(X)
        out = X @ self.coef_[:, :-1].T + self.coef_[:, -1]
        return np.asarray(out)

    def predict(self, X) -> np.ndarray:
        if self._empty_query(X):
            return np.zeros(0, dtype=np.int64)
        margin = self.decision_function(X)
        if self.constant_ is not None:
            return np.full(margin.shape[0], self.constant_, dtype=np.int64)
        if margin.shape[1] == 1:
            return (margin[:, 0] > 0).astype(np.int64)
        return np.argmax(margin, axis=1)

    def predict_proba(self, X):
        raise NotImplementedError("linear SVM exposes decision margins only; use decision_function")

    def get_state(self):
        cfg = {"C": self.C, "n_epochs": self.n_epochs, "batch_size": self.batch_size, "seed": self.seed,
               "n_features": self.n_features_, "n_classes": self.n_classes_, "constant": self.constant_}
        return {"coef": self.coef_}, cfg

    @classmethod
    def from_state(cls, arrays, config):
        m = cls(config["C"], config["n_epochs"], config["batch_size"], config["seed"])
        m.n_features_, m.n_classes_, m.constant_ = config["n_features"], config["n_classes"], config["constant"]
        m.coef_ = arrays["coef"]
        return m
