"""Review records: loading, labels, lexicon scores, splitting, correlations."""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

from revsent.errors import ConfigError, DataError

log = logging.getLogger(__name__)

CORE_FIELDS = ("review_id", "stars", "text", "sentiment_score", "name", "date", "categories")
_WORD = re.compile(r"[a-z0-9']+")
_DATE_FORMATS = ("%Y-%m-%d %H:%M:%S", "%Y-%m-%d")


@dataclass
class RawReview:
    review_id: str
    stars: int
    text: str
    sentiment_score: float | None = None
    restaurant_name: str = ""
    date: int | None = None
    categories: list[str] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def label_binary(self) -> int:
        return binary_label(self.stars)

    @property
    def label_five(self) -> int:
        return self.stars - 1

    def to_json(self) -> dict:
        out = {
            "review_id": self.review_id,
            "stars": self.stars,
            "text": self.text,
            "sentiment_score": self.sentiment_score,
            "name": self.restaurant_name,
            "date": self.date,
            "categories": list(self.categories),
        }
        for k in sorted(self.meta):
            out[k] = self.meta[k]
        return out


def binary_label(stars: int) -> int:
    """1-3 stars are negative (0), 4-5 stars positive (1)."""
    if stars not in (1, 2, 3, 4, 5):
        raise DataError(f"stars must be an integer in 1..5, got {stars!r}")
    return int(stars >= 4)


class LabeledDataset:
    """Ordered reviews plus the three label views derived from them."""

    def __init__(self, records: Sequence[RawReview]):
        self.records = list(records)
        missing = [r.review_id for r in self.records if r.sentiment_score is None]
        if missing:
            raise DataError(f"{len(missing)} records lack a sentiment score, e.g. {missing[0]}")

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i) -> RawReview:
        return self.records[i]

    def __iter__(self) -> Iterator[RawReview]:
        return iter(self.records)

    @property
    def labels_binary(self) -> np.ndarray:
        return np.array([r.label_binary for r in self.records], dtype=np.int64)

    @property
    def labels_five(self) -> np.ndarray:
        return np.array([r.label_five for r in self.records], dtype=np.int64)

    @property
    def targets_sentiment(self) -> np.ndarray:
        return np.array([r.sentiment_score for r in self.records], dtype=np.float64)

    def labels(self, mode: str) -> np.ndarray:
        if mode == "binary":
            return self.labels_binary
        if mode in ("five", "five_star"):
            return self.labels_five
        raise ConfigError(f"label mode must be 'binary' or 'five', got {mode!r}")

    def subset(self, indices) -> "LabeledDataset":
        return LabeledDataset([self.records[i] for i in indices])

    def texts(self) -> list[str]:
        return [r.text for r in self.records]

    def find(self, review_id: str) -> RawReview:
        for r in self.records:
            if r.review_id == review_id:
                return r
        raise KeyError(review_id)


# ---------------------------------------------------------------------------
# lexicon scoring
# ---------------------------------------------------------------------------

def load_lexicon(path=None) -> dict[str, int]:
    """Read a ``word<TAB>integer`` lexicon.  Without a path the bundled
    starter lexicon is used; pass the full AFINN file for real data."""
    if path is None:
        text = resources.files("revsent.resources").joinpath("sentiment_lexicon.tsv").read_text("utf-8")
        source = "bundled lexicon"
    else:
        text = Path(path).read_text("utf-8")
        source = str(path)
    lexicon: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rsplit("\t", 1)
        if len(parts) != 2:
            raise DataError(f"{source}:{lineno}: expected 'word<TAB>score'")
        try:
            lexicon[parts[0].strip().lower()] = int(parts[1])
        except ValueError:
            raise DataError(f"{source}:{lineno}: score {parts[1]!r} is not an integer") from None
    return lexicon


def afinn_score(text: str, lexicon: Mapping[str, int]) -> float:
    """Mean lexicon score over matched tokens, clamped to [-5, 5]; 0.0 if none match."""
    scores = [lexicon[t] for t in _WORD.findall(text.lower()) if t in lexicon]
    if not scores:
        return 0.0
    return float(min(5.0, max(-5.0, sum(scores) / len(scores))))


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

def parse_date(value) -> int | None:
    """``YYYY-MM-DD[ HH:MM:SS]`` (UTC) to UNIX seconds."""
    if value is None or value == "":
        return None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return int(value)
    for fmt in _DATE_FORMATS:
        try:
            dt = datetime.strptime(str(value).strip(), fmt)
        except ValueError:
            continue
        return int(dt.replace(tzinfo=timezone.utc).timestamp())
    raise ValueError(f"unrecognised date {value!r}")


def _cell_value(raw: str):
    s = raw.strip()
    if s == "":
        return None
    low = s.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        x = float(s)
    except ValueError:
        return s
    return x if math.isfinite(x) else None


def _categories(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        parts = re.split(r"[;,]", value)
    else:
        parts = [str(v) for v in value]
    return [p.strip() for p in parts if p and p.strip()]


def _build_record(obj: Mapping[str, Any], where: str, index: int) -> RawReview:
    for key in ("stars", "text"):
        if key not in obj or obj[key] is None:
            raise DataError(f"{where}: record is missing required field '{key}'")
    try:
        stars_f = float(obj["stars"])
    except (TypeError, ValueError):
        raise DataError(f"{where}: stars {obj['stars']!r} is not a number") from None
    if not stars_f.is_integer() or not 1 <= stars_f <= 5:
        raise DataError(f"{where}: stars must be an integer in 1..5, got {obj['stars']!r}")
    text = str(obj["text"])
    if not text.strip():
        raise DataError(f"{where}: text is empty")

    score = obj.get("sentiment_score")
    if score is not None and score != "":
        try:
            score = float(score)
        except (TypeError, ValueError):
            raise DataError(f"{where}: sentiment_score {score!r} is not a number") from None
        if not -5.0 <= score <= 5.0:
            raise DataError(f"{where}: sentiment_score {score} outside [-5, 5]")
    else:
        score = None
    try:
        date = parse_date(obj.get("date"))
    except ValueError as exc:
        raise DataError(f"{where}: {exc}") from None

    meta = {k: v for k, v in obj.items() if k not in CORE_FIELDS}
    rid = obj.get("review_id")
    return RawReview(
        review_id=str(rid) if rid not in (None, "") else f"r{index:06d}",
        stars=int(stars_f),
        text=text,
        sentiment_score=score,
        restaurant_name=str(obj.get("name") or ""),
        date=date,
        categories=_categories(obj.get("categories")),
        meta=meta,
    )


def _iter_jsonl(path: Path):
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def _iter_csv(path: Path):
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return
        for row in reader:
            obj = {}
            for k, v in row.items():
                if k is None:
                    continue
                if k in ("review_id", "text", "name", "date", "categories"):
                    obj[k] = v if v != "" else None
                else:
                    obj[k] = _cell_value(v or "")
            yield reader.line_num, obj


def load_reviews(path, format: str | None = None, lexicon: Mapping[str, int] | None = None) -> LabeledDataset:
    """Load JSON-lines or CSV reviews; missing sentiment scores are filled
    with :func:`afinn_score` using ``lexicon`` (bundled lexicon if None)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"cannot read review file {path}")
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if format in ("jsonl", "json-lines", "json"):
        rows = _iter_jsonl(path)
    elif format == "csv":
        rows = _iter_csv(path)
    else:
        raise ConfigError(f"unknown review format {format!r}; use 'jsonl' or 'csv'")

    records = [_build_record(obj, f"{path}:{lineno}", i) for i, (lineno, obj) in enumerate(rows)]
    if any(r.sentiment_score is None for r in records):
        if lexicon is None:
            log.warning("some records lack sentiment_score; scoring with the bundled lexicon")
            lexicon = load_lexicon()
        for r in records:
            if r.sentiment_score is None:
                r.sentiment_score = afinn_score(r.text, lexicon)
    return LabeledDataset(records)


def write_reviews(ds: LabeledDataset | Sequence[RawReview], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for r in ds:
            fh.write(json.dumps(r.to_json(), sort_keys=True, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.70
    val_frac: float = 0.15
    test_frac: float = 0.15
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if min(fracs) <= 0:
            raise ConfigError(f"split fractions must be positive, got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {sum(fracs)!r}")


def _split_counts(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    n_val = int(math.floor(spec.val_frac * n))
    n_test = int(math.floor(spec.test_frac * n))
    return n - n_val - n_test, n_val, n_test


def split_dataset(ds: LabeledDataset, spec: SplitSpec, stratify: bool = False):
    """Seeded shuffle into (train, val, test); val/test sizes are floored and
    train takes the remainder.  Each split keeps the input order."""
    n = len(ds)
    if n < 3:
        raise DataError(f"need at least 3 records to split, got {n}")
    rng = np.random.default_rng(spec.seed)
    if stratify:
        stars = np.array([r.stars for r in ds], dtype=np.int64)
        parts: list[list[int]] = [[], [], []]
        for s in np.unique(stars):
            idx = rng.permutation(np.flatnonzero(stars == s))
            _, n_val, n_test = _split_counts(len(idx), spec)
            parts[1].extend(idx[:n_val])
            parts[2].extend(idx[n_val:n_val + n_test])
            parts[0].extend(idx[n_val + n_test:])
    else:
        perm = rng.permutation(n)
        _, n_val, n_test = _split_counts(n, spec)
        parts = [list(perm[n_val + n_test:]), list(perm[:n_val]), list(perm[n_val:n_val + n_test])]
    for name, idx in zip(("train", "val", "test"), parts):
        if not idx:
            raise DataError(f"split spec {spec} leaves the {name} split empty for {n} records")
    return tuple(ds.subset(sorted(int(i) for i in idx)) for idx in parts)


# ---------------------------------------------------------------------------
# correlation analysis
# ---------------------------------------------------------------------------

@dataclass
class CorrelationMatrix:
    names: list[str]
    values: np.ndarray

    def get(self, a: str, b: str) -> float:
        return float(self.values[self.names.index(a), self.names.index(b)])

    def to_json(self) -> dict:
        return {"names": self.names, "values": [[round(float(v), 12) for v in row] for row in self.values]}

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([""] + self.names)
            for name, row in zip(self.names, self.values):
                w.writerow([name] + [f"{v:.6f}" for v in row])


def correlation_matrix(columns: Mapping[str, Sequence[float]]) -> CorrelationMatrix:
    """Pairwise Pearson coefficients.

    Missing values (None/NaN) are dropped pairwise.  A column that is constant
    on the rows it shares with another gets 0 for that pair, including with
    itself.
    """
    names = list(columns)
    data = [np.asarray([np.nan if v is None else v for v in columns[k]], dtype=np.float64) for k in names]
    lengths = {len(c) for c in data}
    if len(lengths) > 1:
        raise DataError(f"column lengths differ: { {k: len(c) for k, c in zip(names, data)} }")
    if lengths and lengths.pop() < 2:
        raise DataError("need at least 2 rows per column")
    k = len(names)
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i, k):
            ok = ~(np.isnan(data[i]) | np.isnan(data[j]))
            x, y = data[i][ok], data[j][ok]
            if len(x) < 2:
                r = 0.0
            else:
                dx, dy = x - x.mean(), y - y.mean()
                sx, sy = math.sqrt(float(dx @ dx)), math.sqrt(float(dy @ dy))
                if sx == 0.0 or sy == 0.0:
                    r = 0.0
                elif i == j:
                    r = 1.0
                else:
                    r = max(-1.0, min(1.0, float(dx @ dy) / (sx * sy)))
            out[i, j] = out[j, i] = r
    return CorrelationMatrix(names, out)


def numeric_columns(ds: LabeledDataset) -> dict[str, list]:
    """Labels plus every numeric/boolean meta attribute, for correlation reports."""
    cols: dict[str, list] = {
        "stars": [r.stars for r in ds],
        "sentiment_score": [r.sentiment_score for r in ds],
    }
    if any(r.date is not None for r in ds):
        cols["date"] = [r.date for r in ds]
    keys = sorted({k for r in ds for k in r.meta})
    for k in keys:
        values = [r.meta.get(k) for r in ds]
        present = [v for v in values if v is not None]
        if present and all(isinstance(v, (int, float)) for v in present):
            cols[k] = [None if v is None else float(v) for v in values]
    return cols
