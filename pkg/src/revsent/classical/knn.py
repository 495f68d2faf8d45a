from __future__ import annotations

import numpy as np

from revsent.classical.base import Baseline, as_dense, as_matrix


class Knn(Baseline):
    """Euclidean k-nearest neighbours on z-scored features.

    Distance ties go to the earlier training record; vote ties go to the
    lowest class index.
    """

    name = "knn"

    def __init__(self, k: int = 10, batch_size: int = 256):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.batch_size = batch_size
        self.mean_: np.ndarray | None = None
        self.scale_: np.ndarray | None = None
        self.train_: np.ndarray | None = None
        self.labels_: np.ndarray | None = None

    def fit(self, X, y):
        X = as_dense(X)
        y = self._check_fit_input(X, y)
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale_ = np.where(std > 0, std, 1.0)
        self.train_ = (X - self.mean_) / self.scale_
        self.labels_ = y
        return self

    def kneighbors(self, X) -> np.ndarray:
        """Indices of the k nearest training rows, nearest first."""
        self._check_predict_input(X)
        k = min(self.k, self.train_.shape[0])
        sq_train = (self.train_ ** 2).sum(axis=1)
        out = np.empty((X.shape[0], k), dtype=np.int64)
        for start in range(0, X.shape[0], self.batch_size):
            q = (as_dense(X[start:start + self.batch_size]) - self.mean_) / self.scale_
            d = (q ** 2).sum(axis=1)[:, None] + sq_train[None, :] - 2.0 * q @ self.train_.T
            np.maximum(d, 0.0, out=d)
            out[start:start + q.shape[0]] = np.argsort(d, axis=1, kind="stable")[:, :k]
        return out

    def predict_proba(self, X) -> np.ndarray:
        X = as_matrix(X)
        idx = self.kneighbors(X)
        votes = self.labels_[idx]
        out = np.zeros((idx.shape[0], self.n_classes_))
        for c in range(self.n_classes_):
            out[:, c] = (votes == c).sum(axis=1)
        return out / idx.shape[1]

    def get_state(self):
        arrays = {"mean": self.mean_, "scale": self.scale_, "train": self.train_, "labels": self.labels_}
        return arrays, {"k": self.k, "n_features": self.n_features_, "n_classes": self.n_classes_}

    @classmethod
    def from_state(cls, arrays, config):
        m = cls(config["k"])
        m.n_features_, m.n_classes_ = config["n_features"], config["n_classes"]
        m.mean_, m.scale_, m.train_ = arrays["mean"], arrays["scale"], arrays["train"]
        m.labels_ = arrays["labels"].astype(np.int64)
        return m
