"""Meta-feature engineering: drop list, z-scored numerics, booleans, category multi-hot."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from revsent.errors import ConfigError, DataError
from revsent.ingest import LabeledDataset, RawReview

LEAKING_FIELDS = ("stars", "sentiment_score")
MAX_CATEGORIES = 201

# Label leaks, identifiers, and attributes that carry no sentiment signal or
# identify the restaurant (so a model would learn the venue, not the text).
DEFAULT_DROP_LIST = (
    "stars", "sentiment_score", "review_id", "text", "name", "business_id", "user_id",
    "user_name", "reviewer_name", "city", "state", "address", "postal_code",
    "latitude", "longitude", "n_chars", "n_words", "num_chars", "num_words",
)


@dataclass
class MetaSchema:
    drop_list: frozenset[str]
    numeric_stats: dict[str, tuple[float, float]]
    category_vocab: list[str]
    boolean_passthrough: list[str]
    constant: frozenset[str] = field(default_factory=frozenset)

    @property
    def numeric_names(self) -> list[str]:
        return sorted(self.numeric_stats)

    @property
    def dim(self) -> int:
        return len(self.numeric_stats) + len(self.boolean_passthrough) + len(self.category_vocab)

    def feature_names(self) -> list[str]:
        return (self.numeric_names + list(self.boolean_passthrough)
                + [f"category={c}" for c in self.category_vocab])

    def to_json(self) -> dict:
        return {
            "drop_list": sorted(self.drop_list),
            "numeric_stats": {k: [float(m).hex(), float(s).hex()] for k, (m, s) in sorted(self.numeric_stats.items())},
            "constant": sorted(self.constant),
            "boolean_passthrough": list(self.boolean_passthrough),
            "category_vocab": list(self.category_vocab),
        }

    @classmethod
    def from_json(cls, obj) -> "MetaSchema":
        return cls(
            drop_list=frozenset(obj["drop_list"]),
            numeric_stats={k: (float.fromhex(m), float.fromhex(s)) for k, (m, s) in obj["numeric_stats"].items()},
            category_vocab=list(obj["category_vocab"]),
            boolean_passthrough=list(obj["boolean_passthrough"]),
            constant=frozenset(obj.get("constant", ())),
        )


def _attribute(r: RawReview, name: str):
    if name == "date":
        return r.date
    return r.meta.get(name)


def fit_meta_schema(train: LabeledDataset, drop_list: Iterable[str] = DEFAULT_DROP_LIST,
                    max_categories: int = MAX_CATEGORIES) -> MetaSchema:
    """Fit statistics and the category vocabulary on the training split only.

    Numeric attributes (all present values int/float) are z-scored; boolean
    ones pass through as 0/1; string-valued attributes are ignored.  The date
    counts as numeric (UNIX seconds).  Categories are ranked by train
    frequency, ties broken lexicographically, and capped at ``max_categories``.
    """
    drop = frozenset(drop_list)
    missing = [f for f in LEAKING_FIELDS if f not in drop]
    if missing:
        raise ConfigError(f"drop list must include label-leaking field(s) {missing}; "
                          "they would leak the label into the features")
    if len(train) == 0:
        raise DataError("cannot fit a meta schema on an empty training split")

    names = sorted({k for r in train for k in r.meta} | {"date"})
    numeric: dict[str, tuple[float, float]] = {}
    booleans: list[str] = []
    constant: set[str] = set()
    for name in names:
        if name in drop:
            continue
        values = [v for v in (_attribute(r, name) for r in train) if v is not None]
        if not values:
            continue
        if all(isinstance(v, bool) for v in values):
            booleans.append(name)
        elif all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
            arr = np.asarray(values, dtype=np.float64)
            mu, sd = float(arr.mean()), float(arr.std())
            if sd == 0.0:
                constant.add(name)
            numeric[name] = (mu, sd)

    vocab: list[str] = []
    if "categories" not in drop:
        counts = Counter(c for r in train for c in set(r.categories))
        vocab = sorted(counts, key=lambda c: (-counts[c], c))[:max_categories]
    return MetaSchema(drop, numeric, vocab, booleans, frozenset(constant))


def encode_meta(r: RawReview, schema: MetaSchema) -> np.ndarray:
    """One review to its fixed-width meta vector.

    Missing numerics map to 0 (the train mean); constant attributes are 0;
    categories outside the vocabulary contribute nothing.
    """
    out = np.zeros(schema.dim, dtype=np.float64)
    i = 0
    for name in schema.numeric_names:
        v = _attribute(r, name)
        mu, sd = schema.numeric_stats[name]
        if v is not None and not isinstance(v, (bool, str)) and name not in schema.constant:
            out[i] = (float(v) - mu) / sd
        i += 1
    for name in schema.boolean_passthrough:
        out[i] = 1.0 if _attribute(r, name) is True else 0.0
        i += 1
    if schema.category_vocab:
        index = {c: j for j, c in enumerate(schema.category_vocab)}
        for c in r.categories:
            j = index.get(c)
            if j is not None:
                out[i + j] = 1.0
    return out


def encode_meta_batch(records: Sequence[RawReview], schema: MetaSchema) -> np.ndarray:
    if not records:
        return np.zeros((0, schema.dim))
    return np.stack([encode_meta(r, schema) for r in records])
