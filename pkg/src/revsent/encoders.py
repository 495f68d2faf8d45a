"""Text and meta encoders producing fixed-size review representations.

All encoders work on batches.  CNN input is ``(B, L)`` token ids; HAN input
is ``(B, R, N)`` ids (sentences by words).  Id 0 is padding everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from revsent.autodiff import Linear, Module, Tensor, ops, parameter
from revsent.autodiff.nn import uniform
from revsent.errors import DataError, ShapeError
from revsent.features.text import N_MAX, PAD_ID, TokenizedReview

CNN_FILTERS = 256
CNN_WIDTH = 3
LSTM_HIDDEN = 50
META_HIDDEN = 512


def _embedding_table(vocab_size: int, dim: int, rng, vectors, trainable: bool) -> Tensor:
    if vectors is None:
        vectors = rng.uniform(-0.25, 0.25, size=(vocab_size, dim))
        vectors[PAD_ID] = 0.0
    vectors = np.asarray(vectors)
    if vectors.shape != (vocab_size, dim):
        raise ShapeError(f"embedding table {vectors.shape} does not match ({vocab_size}, {dim})")
    table = parameter(vectors, name="embedding")
    table.requires_grad = trainable
    return table


@dataclass
class EncoderTrace:
    """Intermediate values kept for attribution and attention display."""

    embeddings: Tensor | None = None
    word_attention: np.ndarray | None = None  # (B, R, N)
    sentence_attention: np.ndarray | None = None  # (B, R)
    word_mask: np.ndarray | None = None
    sentence_mask: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


class CnnEncoder(Module):
    """Embedding, width-3 convolution with ReLU, then max over time per filter."""

    kind = "cnn"

    def __init__(self, vocab_size: int, rng: np.random.Generator, embed_dim: int = 100,
                 n_filters: int = CNN_FILTERS, width: int = CNN_WIDTH, seq_len: int = N_MAX,
                 embeddings=None, trainable_embeddings: bool = True):
        if seq_len < width:
            raise ShapeError(f"sequence length {seq_len} is shorter than the filter width {width}")
        self.embedding = _embedding_table(vocab_size, embed_dim, rng, embeddings, trainable_embeddings)
        bound = 1.0 / np.sqrt(width * embed_dim)
        self.weight = uniform(rng, (n_filters, width, embed_dim), bound)
        self.bias = uniform(rng, (n_filters,), bound)
        self.vocab_size, self.embed_dim = vocab_size, embed_dim
        self.n_filters, self.width, self.seq_len = n_filters, width, seq_len

    @property
    def out_dim(self) -> int:
        return self.n_filters

    def config(self) -> dict:
        return {"kind": self.kind, "vocab_size": self.vocab_size, "embed_dim": self.embed_dim,
                "n_filters": self.n_filters, "width": self.width, "seq_len": self.seq_len,
                "trainable_embeddings": self.embedding.requires_grad}

    def batch_ids(self, reviews: list[TokenizedReview]) -> np.ndarray:
        # Always the full fixed length so a review encodes the same alone or in a batch.
        return np.stack([r.padded_flat(self.seq_len) for r in reviews])

    def forward_embedded(self, emb: Tensor) -> Tensor:
        return ops.max_over_time(ops.relu(ops.conv1d(emb, self.weight, self.bias)), axis=1)

    def __call__(self, ids) -> tuple[Tensor, EncoderTrace]:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim != 2:
            raise ShapeError(f"cnn encoder expects (batch, length) ids, got shape {ids.shape}")
        emb = ops.embedding_lookup(self.embedding, ids)
        return self.forward_embedded(emb), EncoderTrace(embeddings=emb, word_mask=ids != PAD_ID)

    def encode(self, review: TokenizedReview) -> Tensor:
        out, _ = self(self.batch_ids([review]))
        return out[0]


class LstmCell(Module):
    """Gate order i, f, g, o; forget-gate bias starts at 1."""

    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator):
        bound = 1.0 / np.sqrt(hidden)
        self.w_x = uniform(rng, (n_in, 4 * hidden), bound)
        self.w_h = uniform(rng, (hidden, 4 * hidden), bound)
        b = rng.uniform(-bound, bound, size=4 * hidden)
        b[hidden:2 * hidden] = 1.0
        self.bias = parameter(b)
        self.n_in, self.hidden = n_in, hidden


def lstm_forward(cell: LstmCell, x: Tensor, mask: np.ndarray | None = None, reverse: bool = False) -> Tensor:
    """Run one direction over ``x`` (B, T, E); returns hidden states (B, T, H).

    Where ``mask`` is false the state is carried through unchanged, so
    padding never leaks into either direction.
    """
    b, t_len, _ = x.shape
    h_dim = cell.hidden
    proj = ops.add(ops.matmul(x, cell.w_x), cell.bias)  # (B, T, 4H), all steps at once
    dtype = x.data.dtype
    h = Tensor(np.zeros((b, h_dim), dtype=dtype))
    c = Tensor(np.zeros((b, h_dim), dtype=dtype))
    outputs = [None] * t_len
    steps = range(t_len - 1, -1, -1) if reverse else range(t_len)
    for t in steps:
        z = ops.add(proj[:, t, :], ops.matmul(h, cell.w_h))
        i = ops.sigmoid(z[:, :h_dim])
        f = ops.sigmoid(z[:, h_dim:2 * h_dim])
        g = ops.tanh(z[:, 2 * h_dim:3 * h_dim])
        o = ops.sigmoid(z[:, 3 * h_dim:])
        c_new = ops.add(ops.mul(f, c), ops.mul(i, g))
        h_new = ops.mul(o, ops.tanh(c_new))
        if mask is not None:
            keep = mask[:, t][:, None]
            c_new = ops.where(keep, c_new, c)
            h_new = ops.where(keep, h_new, h)
        h, c = h_new, c_new
        outputs[t] = h
    return ops.stack(outputs, axis=1)


def bilstm_forward(x: Tensor, forward: LstmCell, backward: LstmCell, mask: np.ndarray | None = None) -> Tensor:
    """Concatenate left-to-right and right-to-left hidden states: (B, T, 2H)."""
    if x.shape[1] == 0:
        raise ShapeError("bilstm needs a non-empty sequence")
    return ops.concat([lstm_forward(forward, x, mask), lstm_forward(backward, x, mask, reverse=True)], axis=-1)


def attention_pool(h: Tensor, context: Tensor, mask: np.ndarray) -> tuple[Tensor, Tensor]:
    """Score each state by a dot product with ``context``, normalise over the
    unmasked positions and return (weighted sum (B, D), weights (B, T))."""
    b, t_len, d = h.shape
    scores = ops.reshape(ops.matmul(h, ops.reshape(context, (d, 1))), (b, t_len))
    weights = ops.masked_softmax(scores, mask, axis=1)
    pooled = ops.sum(ops.mul(h, ops.reshape(weights, (b, t_len, 1))), axis=1)
    return pooled, weights


class HanEncoder(Module):
    """Word BiLSTM + word attention into sentence vectors, then sentence
    BiLSTM + sentence attention into the review vector."""

    kind = "han"

    def __init__(self, vocab_size: int, rng: np.random.Generator, embed_dim: int = 100,
                 word_hidden: int = LSTM_HIDDEN, sentence_hidden: int = LSTM_HIDDEN,
                 embeddings=None, trainable_embeddings: bool = True):
        self.embedding = _embedding_table(vocab_size, embed_dim, rng, embeddings, trainable_embeddings)
        self.word_fwd = LstmCell(embed_dim, word_hidden, rng)
        self.word_bwd = LstmCell(embed_dim, word_hidden, rng)
        self.u_w = uniform(rng, (2 * word_hidden,), 1.0 / np.sqrt(2 * word_hidden))
        self.sent_fwd = LstmCell(2 * word_hidden, sentence_hidden, rng)
        self.sent_bwd = LstmCell(2 * word_hidden, sentence_hidden, rng)
        self.u_s = uniform(rng, (2 * sentence_hidden,), 1.0 / np.sqrt(2 * sentence_hidden))
        self.vocab_size, self.embed_dim = vocab_size, embed_dim
        self.word_hidden, self.sentence_hidden = word_hidden, sentence_hidden

    @property
    def out_dim(self) -> int:
        return 2 * self.sentence_hidden

    def config(self) -> dict:
        return {"kind": self.kind, "vocab_size": self.vocab_size, "embed_dim": self.embed_dim,
                "word_hidden": self.word_hidden, "sentence_hidden": self.sentence_hidden,
                "trainable_embeddings": self.embedding.requires_grad}

    @staticmethod
    def batch_ids(reviews: list[TokenizedReview]) -> np.ndarray:
        """Pad to the largest sentence count and length in the batch; masking
        makes the result independent of the padded size."""
        r = max(len(rv.sentences) for rv in reviews)
        n = max(max(len(s) for s in rv.sentences) for rv in reviews)
        return np.stack([rv.padded_sentences(r, n) for rv in reviews])

    def forward_embedded(self, emb: Tensor, ids: np.ndarray) -> tuple[Tensor, EncoderTrace]:
        b, r, n = ids.shape
        word_mask = ids != PAD_ID
        flat_mask = word_mask.reshape(b * r, n)
        x = ops.reshape(emb, (b * r, n, self.embed_dim))
        v = bilstm_forward(x, self.word_fwd, self.word_bwd, flat_mask)
        s, alpha = attention_pool(v, self.u_w, flat_mask)
        s = ops.reshape(s, (b, r, 2 * self.word_hidden))
        sent_mask = word_mask.any(axis=2)
        t = bilstm_forward(s, self.sent_fwd, self.sent_bwd, sent_mask)
        drr, beta = attention_pool(t, self.u_s, sent_mask)
        trace = EncoderTrace(embeddings=emb, word_attention=alpha.data.reshape(b, r, n),
                             sentence_attention=beta.data.copy(), word_mask=word_mask,
                             sentence_mask=sent_mask)
        return drr, trace

    def __call__(self, ids) -> tuple[Tensor, EncoderTrace]:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim != 3:
            raise ShapeError(f"han encoder expects (batch, sentences, words) ids, got shape {ids.shape}")
        return self.forward_embedded(ops.embedding_lookup(self.embedding, ids), ids)

    def encode(self, review: TokenizedReview) -> tuple[Tensor, EncoderTrace]:
        if review.is_empty:
            raise DataError("cannot encode an empty review")
        out, trace = self(self.batch_ids([review]))
        return out[0], trace


class MetaEncoder(Module):
    """One ReLU layer of 512 units followed by dropout."""

    def __init__(self, n_in: int, rng: np.random.Generator, hidden: int = META_HIDDEN, dropout: float = 0.2,
                 seed: int = 0):
        self.layer = Linear(n_in, hidden, rng)
        self.n_in, self.hidden, self.dropout = n_in, hidden, dropout
        self._rng = np.random.default_rng(seed)

    @property
    def out_dim(self) -> int:
        return self.hidden

    def __call__(self, m) -> Tensor:
        m = m if isinstance(m, Tensor) else Tensor(np.asarray(m))
        if m.ndim != 2 or m.shape[1] != self.n_in:
            raise ShapeError(f"meta encoder built for {self.n_in} features, got shape {m.shape}")
        return ops.dropout(ops.relu(self.layer(m)), self.dropout, self._rng, training=self.training)


def build_text_encoder(config: dict, rng: np.random.Generator, embeddings=None) -> Module:
    cfg = dict(config)
    kind = cfg.pop("kind")
    trainable = cfg.pop("trainable_embeddings", True)
    if kind == "cnn":
        return CnnEncoder(rng=rng, embeddings=embeddings, trainable_embeddings=trainable, **cfg)
    if kind == "han":
        return HanEncoder(rng=rng, embeddings=embeddings, trainable_embeddings=trainable, **cfg)
    raise ValueError(f"unknown text encoder {kind!r}")
