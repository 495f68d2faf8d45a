"""Text encoder + optional meta encoder + fusion layer + task heads, and training."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from revsent.autodiff import Adam, Linear, Module, Tensor, backward, no_grad, ops, parameter
from revsent.autodiff.checkpoint import load_checkpoint, save_checkpoint
from revsent.encoders import EncoderTrace, MetaEncoder, build_text_encoder
from revsent.errors import ConfigError, DataError, ShapeError, TrainingError
from revsent.features.meta import MetaSchema, encode_meta_batch
from revsent.features.text import N_MAX, R_MAX, TokenizedReview, Vocabulary, tokenize_review
from revsent.ingest import LabeledDataset

log = logging.getLogger("revsent.model")

FUSION_UNITS = 256
DEFAULT_LAMBDA = 0.5


class InputMode(str, enum.Enum):
    META_ONLY = "meta"
    TEXT_ONLY = "text"
    JOINT = "joint"


class LossMode(str, enum.Enum):
    SINGLE = "single"
    WEIGHTED = "weighted"
    UNCERTAINTY = "uncertainty"


def n_classes_for(label_mode: str) -> int:
    if label_mode == "binary":
        return 2
    if label_mode in ("five", "five_star"):
        return 5
    raise ConfigError(f"label mode must be 'binary' or 'five', got {label_mode!r}")


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def weighted_loss(l1, l2, lam: float) -> Tensor:
    """``lam * l1 + (1 - lam) * l2``."""
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"loss weight lambda must lie in [0, 1], got {lam}")
    return ops.add(ops.mul(l1, lam), ops.mul(l2, 1.0 - lam))


def uncertainty_loss(l1, l2, eta1, eta2) -> Tensor:
    """Homoscedastic-uncertainty weighting with log-variances ``eta = log sigma^2``:
    ``exp(-eta1) l1 / 2 + exp(-eta2) l2 / 2 + (eta1 + eta2) / 2``."""
    t1 = ops.mul(ops.mul(ops.exp(ops.mul(eta1, -1.0)), l1), 0.5)
    t2 = ops.mul(ops.mul(ops.exp(ops.mul(eta2, -1.0)), l2), 0.5)
    return ops.add(ops.add(t1, t2), ops.mul(ops.add(eta1, eta2), 0.5))


# ---------------------------------------------------------------------------
# inputs
# ---------------------------------------------------------------------------

@dataclass
class DeepInputs:
    """Tokenised reviews with aligned meta rows, labels and sentiment targets."""

    reviews: list[TokenizedReview]
    meta: np.ndarray | None
    labels: np.ndarray
    targets: np.ndarray
    review_ids: list[str]

    def __len__(self) -> int:
        return len(self.reviews)

    def subset(self, idx) -> "DeepInputs":
        idx = np.asarray(idx, dtype=np.int64)
        return DeepInputs([self.reviews[i] for i in idx], None if self.meta is None else self.meta[idx],
                          self.labels[idx], self.targets[idx], [self.review_ids[i] for i in idx])


def make_inputs(ds: LabeledDataset, vocab: Vocabulary, schema: MetaSchema | None, label_mode: str = "binary",
                n_max: int = N_MAX, r_max: int = R_MAX) -> DeepInputs:
    reviews = [tokenize_review(r.text, vocab, n_max, r_max) for r in ds]
    meta = encode_meta_batch(ds, schema) if schema is not None else None
    return DeepInputs(reviews, meta, ds.labels(label_mode), ds.targets_sentiment,
                      [r.review_id for r in ds])


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

@dataclass
class ForwardOutput:
    logits: Tensor
    sentiment: Tensor | None
    trace: EncoderTrace
    fused: Tensor


class JointModel(Module):
    def __init__(self, encoder_config: dict, n_classes: int, input_mode: InputMode | str = InputMode.JOINT,
                 meta_dim: int = 0, loss_mode: LossMode | str = LossMode.SINGLE, lam: float = DEFAULT_LAMBDA,
                 fusion_units: int = FUSION_UNITS, meta_dropout: float = 0.2, seed: int = 0,
                 embeddings=None):
        input_mode, loss_mode = InputMode(input_mode), LossMode(loss_mode)
        if input_mode is InputMode.META_ONLY:
            raise ConfigError("deep models need text input; meta-only runs use the classical/MLP path")
        if input_mode is InputMode.JOINT and meta_dim <= 0:
            raise ConfigError("joint input mode needs meta_dim > 0")
        if loss_mode is LossMode.WEIGHTED and not 0.0 <= lam <= 1.0:
            raise ConfigError(f"loss weight lambda must lie in [0, 1], got {lam}")
        rng = np.random.default_rng(seed)
        self.encoder = build_text_encoder(encoder_config, rng, embeddings)
        fusion_in = self.encoder.out_dim
        if input_mode is InputMode.JOINT:
            self.meta_encoder = MetaEncoder(meta_dim, rng, dropout=meta_dropout, seed=seed + 1)
            fusion_in += self.meta_encoder.out_dim
        else:
            self.meta_encoder = None
        self.fusion = Linear(fusion_in, fusion_units, rng)
        self.cls_head = Linear(fusion_units, n_classes, rng)
        self.reg_head = Linear(fusion_units, 1, rng) if loss_mode is not LossMode.SINGLE else None
        self.eta = parameter(np.zeros(2), name="eta") if loss_mode is LossMode.UNCERTAINTY else None
        self.input_mode, self.loss_mode, self.lam = input_mode, loss_mode, float(lam)
        self.n_classes, self.meta_dim, self.fusion_units = n_classes, meta_dim, fusion_units
        self.meta_dropout, self.seed = meta_dropout, seed

    def config(self) -> dict:
        return {"encoder": self.encoder.config(), "n_classes": self.n_classes,
                "input_mode": self.input_mode.value, "meta_dim": self.meta_dim,
                "loss_mode": self.loss_mode.value, "lam": self.lam, "fusion_units": self.fusion_units,
                "meta_dropout": self.meta_dropout, "seed": self.seed}

    @property
    def fusion_in(self) -> int:
        return self.fusion.n_in

    def batch_ids(self, reviews: list[TokenizedReview]) -> np.ndarray:
        return self.encoder.batch_ids(reviews)

    def _meta_tensor(self, meta, batch: int) -> Tensor | None:
        if self.input_mode is not InputMode.JOINT:
            return None  # text-only models ignore any meta passed in
        if meta is None:
            raise DataError("joint model called without meta features")
        meta = np.asarray(meta)
        if meta.ndim != 2 or meta.shape[0] != batch:
            raise ShapeError(f"meta rows {meta.shape} do not match batch of {batch}")
        return Tensor(meta)

    def forward_embedded(self, emb: Tensor, ids: np.ndarray, meta=None) -> ForwardOutput:
        """Forward from token embeddings, the entry point for attribution."""
        if self.encoder.kind == "han":
            drr, trace = self.encoder.forward_embedded(emb, ids)
        else:
            drr = self.encoder.forward_embedded(emb)
            trace = EncoderTrace(embeddings=emb, word_mask=ids != 0)
        m = self._meta_tensor(meta, ids.shape[0])
        rep = drr if m is None else ops.concat([drr, self.meta_encoder(m)], axis=-1)
        fused = ops.relu(self.fusion(rep))
        logits = self.cls_head(fused)
        sentiment = ops.reshape(self.reg_head(fused), (-1,)) if self.reg_head is not None else None
        return ForwardOutput(logits, sentiment, trace, fused)

    def __call__(self, ids, meta=None) -> ForwardOutput:
        ids = np.asarray(ids, dtype=np.int64)
        return self.forward_embedded(ops.embedding_lookup(self.encoder.embedding, ids), ids, meta)

    def embed(self, ids) -> Tensor:
        return ops.embedding_lookup(self.encoder.embedding, np.asarray(ids, dtype=np.int64))

    def loss(self, out: ForwardOutput, labels, targets) -> tuple[Tensor, Tensor, Tensor | None]:
        """Return (objective, classification loss, regression loss or None)."""
        l1 = ops.cross_entropy(out.logits, labels)
        if self.loss_mode is LossMode.SINGLE:
            return l1, l1, None
        l2 = ops.mse(out.sentiment, np.asarray(targets))
        if self.loss_mode is LossMode.WEIGHTED:
            return weighted_loss(l1, l2, self.lam), l1, l2
        return uncertainty_loss(l1, l2, self.eta[0], self.eta[1]), l1, l2


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    batch_size: int = 32
    epochs: int = 5
    lr: float = 1e-4
    seed: int = 0
    patience: int | None = 2
    weight_decay: float = 0.0
    clip_norm: float | None = None

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if self.patience is not None and self.patience < 0:
            raise ConfigError("patience must be >= 0 (or None to disable early stopping)")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def rows(self) -> list[dict]:
        return [asdict(r) for r in self.records]


def _batches(n: int, batch_size: int, order=None):
    order = np.arange(n) if order is None else order
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _check_labels(model: JointModel, data: DeepInputs, what: str) -> None:
    if len(data) == 0:
        raise DataError(f"{what} split is empty")
    if data.labels.min() < 0 or data.labels.max() >= model.n_classes:
        raise ConfigError(f"{what} labels exceed the {model.n_classes}-way head; check the label mode")


def evaluate_loss(model: JointModel, data: DeepInputs, batch_size: int = 256) -> tuple[float, float]:
    """Objective and accuracy over ``data`` in eval mode."""
    was_training = model.training
    model.eval()
    total, correct = 0.0, 0
    with no_grad():
        for b in _batches(len(data), batch_size):
            out = model(model.batch_ids([data.reviews[i] for i in b]), None if data.meta is None else data.meta[b])
            loss, _, _ = model.loss(out, data.labels[b], data.targets[b])
            total += float(loss.item()) * b.size
            correct += int((np.argmax(out.logits.data, axis=1) == data.labels[b]).sum())
    model.train(was_training)
    return total / len(data), correct / len(data)


def train(model: JointModel, train_data: DeepInputs, val_data: DeepInputs, cfg: TrainConfig,
          progress=None) -> TrainHistory:
    """Mini-batch Adam with per-epoch shuffling and early stopping on val loss.

    Training stops once more than ``cfg.patience`` consecutive epochs fail to
    improve the best validation loss; the best snapshot is restored.
    """
    _check_labels(model, train_data, "train")
    _check_labels(model, val_data, "validation")
    opt = Adam(model.trainable_parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay, clip_norm=cfg.clip_norm)
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    history = TrainHistory()
    best_loss, best_state, stale = math.inf, model.state_dict(), 0
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        total = 0.0
        for bi, b in enumerate(_batches(len(train_data), cfg.batch_size, shuffle_rng.permutation(len(train_data)))):
            meta = None if train_data.meta is None else train_data.meta[b]
            out = model(model.batch_ids([train_data.reviews[i] for i in b]), meta)
            loss, l1, l2 = model.loss(out, train_data.labels[b], train_data.targets[b])
            value = float(loss.item())
            if not math.isfinite(value):
                parts = f"classification={float(l1.item())}" + (
                    "" if l2 is None else f", regression={float(l2.item())}")
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi} ({parts})")
            opt.zero_grad()
            backward(loss)
            try:
                opt.step()
            except TrainingError as exc:
                raise TrainingError(f"epoch {epoch}, batch {bi}: {exc}") from None
            total += value * b.size
        val_loss, val_acc = evaluate_loss(model, val_data)
        rec = EpochRecord(epoch, total / len(train_data), val_loss, val_acc)
        history.records.append(rec)
        log.info("epoch %d train_loss=%.4f val_loss=%.4f val_acc=%.4f", epoch, rec.train_loss, val_loss, val_acc)
        if progress is not None:
            progress(rec)
        if val_loss < best_loss:
            best_loss, best_state, stale = val_loss, model.state_dict(), 0
            history.best_epoch = epoch
        else:
            stale += 1
            if cfg.patience is not None and stale > cfg.patience:
                history.stopped_early = True
                break
    model.load_state_dict(best_state)
    model.eval()
    return history


# ---------------------------------------------------------------------------
# inference and persistence
# ---------------------------------------------------------------------------

@dataclass
class Predictions:
    classes: np.ndarray
    probabilities: np.ndarray
    sentiment: np.ndarray | None

    def stars(self) -> np.ndarray:
        """Five-way class indices 0..4 as star ratings 1..5."""
        return self.classes + 1


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def predict(model: JointModel, data: DeepInputs, batch_size: int = 256) -> Predictions:
    model.eval()
    logits, sentiment = [], []
    with no_grad():
        for b in _batches(len(data), batch_size):
            out = model(model.batch_ids([data.reviews[i] for i in b]), None if data.meta is None else data.meta[b])
            logits.append(out.logits.data.astype(np.float64))
            if out.sentiment is not None:
                sentiment.append(out.sentiment.data.astype(np.float64))
    if not logits:
        return Predictions(np.zeros(0, dtype=np.int64), np.zeros((0, model.n_classes)), None)
    logits = np.concatenate(logits)
    # np.argmax takes the first maximum, so ties go to the lower class index
    return Predictions(np.argmax(logits, axis=1), softmax_rows(logits),
                       np.concatenate(sentiment) if sentiment else None)


def save_model(model: JointModel, directory, vocab: Vocabulary, schema: MetaSchema | None = None,
               extra: dict | None = None) -> Path:
    config = {"model": model.config(), "vocab": vocab.to_json(),
              "meta_schema": schema.to_json() if schema is not None else None, **(extra or {})}
    if model.eta is not None:
        config["eta"] = [float(v) for v in model.eta.data]
    dtype = "<f8" if model.fusion.weight.dtype == np.float64 else "<f4"
    return save_checkpoint(directory, model.state_dict(), config, default_dtype=dtype)


def load_model(directory) -> tuple[JointModel, Vocabulary, MetaSchema | None, dict]:
    arrays, config = load_checkpoint(directory)
    if "model" not in config or "vocab" not in config:
        raise DataError(f"{directory}: not a deep-model checkpoint")
    mc = dict(config["model"])
    model = JointModel(mc.pop("encoder"), **mc)
    try:
        model.load_state_dict(arrays)
    except (KeyError, ValueError) as exc:
        raise DataError(f"{directory}: {exc}") from None
    model.eval()
    schema = MetaSchema.from_json(config["meta_schema"]) if config.get("meta_schema") else None
    return model, Vocabulary.from_json(config["vocab"]), schema, config
