"""TF-IDF with raw counts, smoothed idf and L2-normalised rows."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from revsent.errors import DataError


def ngrams(tokens: Sequence[str], ngram_range=(1, 1)) -> list[str]:
    lo, hi = ngram_range
    out = []
    for n in range(lo, hi + 1):
        out.extend(" ".join(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
    return out


@dataclass
class TfIdfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    doc_count: int
    ngram_range: tuple[int, int] = (1, 1)

    @property
    def dim(self) -> int:
        return len(self.vocabulary)

    def transform(self, docs: Sequence[Sequence[str]]) -> sp.csr_matrix:
        """Token streams to an (n_docs, dim) CSR matrix."""
        indptr, indices, values = [0], [], []
        for doc in docs:
            counts = Counter(t for t in ngrams(doc, self.ngram_range) if t in self.vocabulary)
            cols = sorted(self.vocabulary[t] for t in counts)
            inv = {self.vocabulary[t]: t for t in counts}
            row = np.array([counts[inv[c]] * self.idf[c] for c in cols], dtype=np.float64)
            norm = math.sqrt(float(row @ row)) if row.size else 0.0
            if norm > 0:
                row = row / norm
            indices.extend(cols)
            values.extend(row.tolist())
            indptr.append(len(indices))
        return sp.csr_matrix((np.array(values, dtype=np.float64), np.array(indices, dtype=np.int64),
                              np.array(indptr, dtype=np.int64)), shape=(len(docs), self.dim))

    def to_json(self) -> dict:
        terms = sorted(self.vocabulary, key=self.vocabulary.__getitem__)
        return {"terms": terms, "idf": [float(x).hex() for x in self.idf],
                "doc_count": self.doc_count, "ngram_range": list(self.ngram_range)}

    @classmethod
    def from_json(cls, obj) -> "TfIdfModel":
        vocab = {t: i for i, t in enumerate(obj["terms"])}
        idf = np.array([float.fromhex(x) for x in obj["idf"]], dtype=np.float64)
        return cls(vocab, idf, int(obj["doc_count"]), tuple(obj["ngram_range"]))


def fit_tfidf(docs: Sequence[Sequence[str]], ngram_range=(1, 1), max_features: int | None = None) -> TfIdfModel:
    """Vocabulary is sorted lexicographically; idf(t) = ln((1+N)/(1+df)) + 1.

    ``max_features`` keeps the terms with the highest document frequency
    (ties broken lexicographically) to bound the width of dense copies.
    """
    if len(docs) == 0:
        raise DataError("cannot fit TF-IDF on an empty corpus")
    df: Counter = Counter()
    for doc in docs:
        df.update(set(ngrams(doc, ngram_range)))
    if not df:
        raise DataError("cannot fit TF-IDF: corpus has no terms")
    terms = sorted(df)
    if max_features is not None:
        if max_features < 1:
            raise ValueError("max_features must be positive")
        terms = sorted(sorted(terms, key=lambda t: -df[t])[:max_features])
    n = len(docs)
    idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in terms], dtype=np.float64)
    return TfIdfModel({t: i for i, t in enumerate(terms)}, idf, n, tuple(ngram_range))


def tfidf_vector(doc: Sequence[str], model: TfIdfModel) -> sp.csr_matrix:
    return model.transform([doc])
