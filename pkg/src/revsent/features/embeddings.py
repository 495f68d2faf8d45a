from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from revsent.errors import DataError
from revsent.features.text import PAD_ID, Vocabulary

EMBED_DIM = 100


@dataclass
class EmbeddingTable:
    dim: int
    vectors: np.ndarray
    oov_policy: str = "random"
    found: int = 0


def _oov_rows(n: int, dim: int, policy: str, rng: np.random.Generator) -> np.ndarray:
    if policy == "zero":
        return np.zeros((n, dim))
    if policy == "random":
        return rng.uniform(-0.25, 0.25, size=(n, dim))
    raise ValueError(f"oov_policy must be 'zero' or 'random', got {policy!r}")


def random_embeddings(vocab: Vocabulary, dim: int = EMBED_DIM, seed: int = 0) -> EmbeddingTable:
    """Seeded uniform(-0.25, 0.25) table; used when no pretrained file is given."""
    rng = np.random.default_rng(seed)
    vectors = _oov_rows(len(vocab), dim, "random", rng)
    vectors[PAD_ID] = 0.0
    return EmbeddingTable(dim, vectors, "random", 0)


def load_embeddings(path, vocab: Vocabulary, oov_policy: str = "random", seed: int = 0) -> EmbeddingTable:
    """Read a GloVe-style text file (``token v1 ... vD`` per line).

    A leading word2vec ``count dim`` header line is skipped.  Rows are filled
    for vocabulary tokens found in the file; the rest follow ``oov_policy``.
    """
    path = Path(path)
    dim = None
    found: dict[int, np.ndarray] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").rstrip().split(" ")
            if not parts or parts == [""]:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            token, comps = parts[0], parts[1:]
            if dim is None:
                if not comps:
                    raise DataError(f"{path}:{lineno}: no vector components")
                dim = len(comps)
            elif len(comps) != dim:
                raise DataError(f"{path}:{lineno}: expected {dim} components, found {len(comps)}")
            if token not in vocab or vocab.id(token) in found:
                continue
            try:
                found[vocab.id(token)] = np.array([float(c) for c in comps])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric vector component") from None
    if dim is None:
        raise DataError(f"{path}: no embedding vectors")
    vectors = _oov_rows(len(vocab), dim, oov_policy, np.random.default_rng(seed))
    for i, v in found.items():
        vectors[i] = v
    vectors[PAD_ID] = 0.0
    return EmbeddingTable(dim, vectors, oov_policy, len(found))
