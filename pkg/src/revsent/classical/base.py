from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp

from revsent.errors import DataError, NotFittedError, ShapeError

log = logging.getLogger("revsent.classical")


def as_dense(X) -> np.ndarray:
    if sp.issparse(X):
        return np.ascontiguousarray(X.toarray(), dtype=np.float64)
    return np.ascontiguousarray(np.asarray(X, dtype=np.float64))


def as_matrix(X):
    """CSR for sparse input, a 2-D float64 array otherwise (no densifying)."""
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    return X.reshape(0, 0) if X.size == 0 and X.ndim < 2 else X


def joint_features(meta, text):
    """Concatenate meta and TF-IDF columns; stays sparse if ``text`` is."""
    if meta.shape[0] != text.shape[0]:
        raise ShapeError(f"joint features: {meta.shape[0]} meta rows vs {text.shape[0]} text rows")
    if sp.issparse(text):
        return sp.hstack([sp.csr_matrix(np.asarray(meta, dtype=np.float64)), text], format="csr")
    return np.hstack([np.asarray(meta, dtype=np.float64), np.asarray(text, dtype=np.float64)])


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    if n == 0:
        return 0.0
    # (n^2 - sum c^2) / n^2 is exact up to one rounding for integer counts
    return float((n * n - (counts * counts).sum()) / (n * n))


class Baseline:
    """Common fit/predict plumbing for the classical models."""

    name = "baseline"
    n_features_: int | None = None
    n_classes_: int | None = None

    def _check_fit_input(self, X, y):
        y = np.asarray(y, dtype=np.int64)
        if X.shape[0] == 0 or y.size == 0:
            raise DataError(f"{self.name}: cannot fit on empty data")
        if X.shape[0] != y.size:
            raise ShapeError(f"{self.name}: X has {X.shape[0]} rows but y has {y.size} labels")
        if y.min() < 0:
            raise DataError(f"{self.name}: class labels must be non-negative")
        self.n_features_ = int(X.shape[1])
        self.n_classes_ = int(y.max()) + 1
        return y

    def _check_predict_input(self, X):
        if self.n_features_ is None:
            raise NotFittedError(f"{self.name} is not fitted")
        if X.ndim != 2 or X.shape[1] != self.n_features_:
            raise ShapeError(f"{self.name}: fitted on {self.n_features_} features, got shape {X.shape}")

    def _empty_query(self, X) -> bool:
        """True for a zero-row query, which predicts to an empty array."""
        if self.n_features_ is None:
            raise NotFittedError(f"{self.name} is not fitted")
        return X.shape[0] == 0 if hasattr(X, "shape") else len(X) == 0

    def predict(self, X) -> np.ndarray:
        if self._empty_query(X):
            return np.zeros(0, dtype=np.int64)
        return np.argmax(self.predict_proba(X), axis=1)

    # Serialisation: subclasses return (arrays, config) and rebuild from them.
    def get_state(self) -> tuple[dict, dict]:
        raise NotImplementedError

    @classmethod
    def from_state(cls, arrays, config):
        raise NotImplementedError
