"""Token attributions (gradient x input, integrated gradients), attention
extraction and HTML heatmaps.

Attribution methods work on an :class:`AttributionTarget`: the token
embeddings of one review, which positions are real tokens, and a function
mapping a batch of embeddings to one scalar score per row.  For a trained
model the score is the log-probability of the target class, so a positive
attribution means the token pushes towards that class.
"""

from __future__ import annotations

import html
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from revsent.autodiff import Tensor, backward, no_grad, ops
from revsent.encoders import EncoderTrace
from revsent.errors import ConfigError, DataError, RevsentError
from revsent.features.text import PAD_ID, TokenizedReview

MIN_IG_STEPS = 8


@dataclass
class AttributionTarget:
    embeddings: np.ndarray  # (1, ..., E)
    mask: np.ndarray  # (1, ...) true at real tokens
    tokens: list[str]  # one per true mask position, in order
    score: Callable[[Tensor], Tensor]  # (m, ..., E) -> (m,)
    target_class: int | None = None
    predicted: int | None = None

    def __post_init__(self):
        if int(self.mask.sum()) != len(self.tokens):
            raise ValueError(f"{int(self.mask.sum())} masked positions but {len(self.tokens)} tokens")
        if not self.tokens:
            raise DataError("cannot attribute an empty review")


@dataclass
class Attribution:
    tokens: list[str]
    scores: np.ndarray
    target: int | None
    method: str
    prediction: int | None = None
    label: int | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if len(self.tokens) != self.scores.size:
            raise ValueError("tokens and scores differ in length")
        if not np.all(np.isfinite(self.scores)):
            raise RevsentError("attribution scores are not finite")

    def to_json(self) -> dict:
        return {"tokens": list(self.tokens), "scores": [float(s) for s in self.scores],
                "method": self.method, "target": self.target, "prediction": self.prediction,
                "label": self.label, **self.extras}


def _grads(target: AttributionTarget, emb: np.ndarray) -> np.ndarray:
    x = Tensor(emb, requires_grad=True)
    scores = target.score(x)
    backward(ops.sum(scores))
    return x.grad.astype(np.float64)


def _per_token(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return values.sum(axis=-1)[mask]


def grad_x_input(target: AttributionTarget) -> Attribution:
    """Per token: sum over embedding dims of value x d(score)/d(value)."""
    x = target.embeddings
    g = _grads(target, x)
    return Attribution(target.tokens, _per_token(x.astype(np.float64) * g, target.mask),
                       target.target_class, "grad_x_input")


def integrated_gradients(target: AttributionTarget, steps: int = 64) -> Attribution:
    """Midpoint Riemann sum of the gradient along the straight path from the
    all-zero (padding) embedding to the input, times the input."""
    if steps < MIN_IG_STEPS:
        raise ConfigError(f"integrated gradients needs at least {MIN_IG_STEPS} steps, got {steps}")
    x = target.embeddings
    alphas = (np.arange(steps) + 0.5) / steps
    path = alphas.reshape((steps,) + (1,) * (x.ndim - 1)) * x
    g = _grads(target, path.astype(x.dtype))
    attr = x.astype(np.float64)[0] * g.mean(axis=0)
    with no_grad():
        f_x = float(target.score(Tensor(x)).data[0])
        f_0 = float(target.score(Tensor(np.zeros_like(x))).data[0])
    scores = _per_token(attr[None], target.mask)
    return Attribution(target.tokens, scores, target.target_class, f"integrated_gradients({steps})",
                       extras={"f_input": f_x, "f_baseline": f_0})


def completeness_residual(attr: Attribution) -> float:
    """|sum(attr) - (f(x) - f(0))| relative to |f(x) - f(0)|."""
    delta = attr.extras["f_input"] - attr.extras["f_baseline"]
    return abs(float(attr.scores.sum()) - delta) / max(abs(delta), 1e-12)


def model_target(model, review: TokenizedReview, meta_row=None, target_class: int | None = None) -> AttributionTarget:
    """Build the attribution target for one review under a trained JointModel.

    ``target_class`` defaults to the predicted class.
    """
    model.eval()
    ids = model.batch_ids([review])
    emb = model.embed(ids).data
    meta = None if meta_row is None else np.asarray(meta_row, dtype=np.float64).reshape(1, -1)
    mask = ids != PAD_ID
    if model.encoder.kind == "han":
        tokens = [review.sentence_tokens[r][n] for r, n in zip(*np.nonzero(mask[0]))]
    else:
        tokens = [review.flat_words[i] for i in np.flatnonzero(mask[0])]
    with no_grad():
        logits = model.forward_embedded(Tensor(emb), ids, meta).logits.data
    predicted = int(np.argmax(logits[0]))
    cls = predicted if target_class is None else int(target_class)
    if not 0 <= cls < model.n_classes:
        raise ConfigError(f"target class {cls} outside 0..{model.n_classes - 1}")

    def score(x: Tensor) -> Tensor:
        m = x.shape[0]
        rep_ids = np.repeat(ids, m, axis=0)
        rep_meta = None if meta is None else np.repeat(meta, m, axis=0)
        logp = ops.log_softmax(model.forward_embedded(x, rep_ids, rep_meta).logits, axis=-1)
        return logp[:, cls]

    return AttributionTarget(emb, mask, tokens, score, cls, predicted)


def explain(model, review: TokenizedReview, meta_row=None, target_class: int | None = None,
            method: str = "grad_x_input", steps: int = 64, label: int | None = None) -> Attribution:
    target = model_target(model, review, meta_row, target_class)
    if method == "grad_x_input":
        attr = grad_x_input(target)
    elif method in ("integrated_gradients", "ig"):
        attr = integrated_gradients(target, steps)
    else:
        raise ConfigError(f"unknown attribution method {method!r}")
    attr.prediction, attr.label = target.predicted, label
    return attr


# ---------------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------------

@dataclass
class AttentionWeights:
    words: list[np.ndarray]  # one array per real sentence, real tokens only
    sentences: np.ndarray


def extract_attention(trace: EncoderTrace, index: int = 0) -> AttentionWeights:
    """Attention weights of review ``index`` exactly as used in the forward pass."""
    if trace.word_attention is None or trace.sentence_attention is None:
        raise ConfigError("this encoder has no attention weights (use a HAN model)")
    smask = trace.sentence_mask[index]
    words = [trace.word_attention[index, r][trace.word_mask[index, r]] for r in np.flatnonzero(smask)]
    return AttentionWeights(words, trace.sentence_attention[index][smask])


def attention_attribution(review: TokenizedReview, weights: AttentionWeights) -> Attribution:
    """Word weight times its sentence weight, for heatmap display."""
    tokens, scores = [], []
    real = [(words, ids) for words, ids in zip(review.sentence_tokens, review.sentences)
            if any(i != PAD_ID for i in ids)]
    for (words, ids), w, b in zip(real, weights.words, weights.sentences):
        tokens.extend(t for t, i in zip(words, ids) if i != PAD_ID)
        scores.extend((w * b).tolist())
    return Attribution(tokens, np.array(scores), None, "attention")


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def _style(score: float, top: float) -> str:
    if top == 0 or score == 0:
        return ""
    alpha = abs(score) / top
    rgb = "0,160,0" if score > 0 else "220,0,0"
    return f' style="background-color: rgba({rgb},{alpha:.4f})"'


def render_heatmap(attr: Attribution, path, title: str | None = None, sidecar: bool = True) -> Path:
    """Write a self-contained HTML page shading each token green (supports the
    target) or red (opposes it), opacity proportional to |score| / max |score|."""
    top = float(np.max(np.abs(attr.scores))) if attr.scores.size else 0.0
    spans = "\n".join(f'<span class="tok"{_style(float(s), top)} title="{s:.6g}">{html.escape(t)}</span>'
                      for t, s in zip(attr.tokens, attr.scores))
    header = html.escape(title or f"{attr.method} attribution")
    doc = f"""<!DOCTYPE html>
<html><head><meta charset="utf-8"><title>{header}</title>
<style>body{{font-family:sans-serif;max-width:50em;margin:2em auto;line-height:2}}
.tok{{padding:2px 3px;margin:1px;border-radius:3px}}</style></head>
<body><h1>{header}</h1>
<p>predicted: {attr.prediction} &middot; label: {attr.label} &middot; target: {attr.target}</p>
<p>
{spans}
</p></body></html>
"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(doc, encoding="utf-8")
        if sidecar:
            path.with_suffix(".json").write_text(json.dumps(attr.to_json(), indent=2) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write heatmap {path}: {exc}") from None
    return path
