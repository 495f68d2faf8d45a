"""Accuracy, confusion matrix, per-class scores, per-restaurant buckets and loss-curve CSVs."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from revsent.errors import DataError, ShapeError

DEFAULT_BUCKET_EDGES = (0, 5, 20, 100)  # buckets: 0, 1-5, 6-20, 21-100, >100
CURVE_FIELDS = ("epoch", "train_loss", "val_loss", "val_accuracy")


@dataclass
class GroupAccuracy:
    bucket: str
    accuracy: float | None  # None when the bucket is empty
    count: int


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # rows true, columns predicted
    n: int
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_f1: float
    per_group: list[GroupAccuracy] = field(default_factory=list)

    def to_json(self) -> dict:
        def num(v):
            return None if v is None or (isinstance(v, float) and math.isnan(v)) else float(v)

        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "confusion": self.confusion.tolist(),
            "per_class": [{"class": c, "precision": num(p), "recall": num(r), "f1": num(f)}
                          for c, (p, r, f) in enumerate(zip(self.precision, self.recall, self.f1))],
            "per_group": [{"bucket": g.bucket, "accuracy": g.accuracy, "count": g.count} for g in self.per_group],
        }

    def write(self, path) -> Path:
        """JSON report plus the confusion matrix as ``<stem>_confusion.csv``."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        k = self.confusion.shape[0]
        w.writerow(["true\\pred", *range(k)])
        for c in range(k):
            w.writerow([c, *self.confusion[c].tolist()])
        path.with_name(path.stem + "_confusion.csv").write_text(buf.getvalue())
        return path


def _safe_div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.full(a.shape, np.nan)
    np.divide(a, b, out=out, where=b > 0)
    return out


def evaluate(predictions, labels, n_classes: int | None = None) -> EvalReport:
    pred = np.asarray(predictions, dtype=np.int64)
    true = np.asarray(labels, dtype=np.int64)
    if pred.shape != true.shape:
        raise ShapeError(f"{pred.size} predictions vs {true.size} labels")
    if true.size == 0:
        raise DataError("cannot evaluate an empty prediction set")
    k = int(max(pred.max(), true.max()) + 1) if n_classes is None else n_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (true, pred), 1)
    tp = np.diag(confusion).astype(np.float64)
    precision = _safe_div(tp, confusion.sum(axis=0).astype(np.float64))
    recall = _safe_div(tp, confusion.sum(axis=1).astype(np.float64))
    f1 = _safe_div(2 * precision * recall, precision + recall)
    f1 = np.where(np.isnan(f1) & ~np.isnan(precision) & ~np.isnan(recall), 0.0, f1)
    present = confusion.sum(axis=1) > 0  # macro average over classes present in the labels
    macro = float(np.nan_to_num(f1[present]).mean())
    return EvalReport(float(tp.sum() / true.size), confusion, int(true.size), precision, recall, f1, macro)


def bucket_labels(edges: Sequence[int] = DEFAULT_BUCKET_EDGES) -> list[str]:
    edges = list(edges)
    if edges != sorted(set(edges)) or edges[0] < 0:
        raise ValueError("bucket edges must be strictly increasing and non-negative")
    labels, lo = [], 0
    for e in edges:
        labels.append(str(e) if lo == e else f"{lo}-{e}")
        lo = e + 1
    labels.append(f">{edges[-1]}")
    return labels


def per_restaurant_bias(predictions, labels, names: Sequence[str], train_counts: Mapping[str, int],
                        edges: Sequence[int] = DEFAULT_BUCKET_EDGES) -> list[GroupAccuracy]:
    """Accuracy of test records bucketed by how often their restaurant appears in train.

    Bucket i holds train counts in (edges[i-1], edges[i]]; the last one is > edges[-1].
    """
    pred = np.asarray(predictions)
    true = np.asarray(labels)
    if not (pred.size == true.size == len(names)):
        raise ShapeError(f"{pred.size} predictions, {true.size} labels and {len(names)} names must align")
    counts = np.array([int(train_counts.get(n, 0)) for n in names], dtype=np.int64)
    which = np.searchsorted(np.asarray(edges), counts, side="left")
    correct = pred == true
    out = []
    for b, label in enumerate(bucket_labels(edges)):
        sel = which == b
        n = int(sel.sum())
        out.append(GroupAccuracy(label, float(correct[sel].mean()) if n else None, n))
    return out


def export_curves(history, path) -> Path:
    """Write ``epoch,train_loss,val_loss,val_accuracy`` (floats as repr for exact round-trip)."""
    rows = history.rows() if hasattr(history, "rows") else list(history)
    if not rows:
        raise DataError("empty training history")
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_FIELDS)
    for r in rows:
        w.writerow([int(r["epoch"]), *(repr(float(r[k])) for k in CURVE_FIELDS[1:])])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise DataError(f"cannot write curves {path}: {exc}") from None
    return path


def read_curves(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CURVE_FIELDS:
            raise DataError(f"{path}: expected header {','.join(CURVE_FIELDS)}")
        return [{"epoch": int(r["epoch"]), **{k: float(r[k]) for k in CURVE_FIELDS[1:]}} for r in reader]
