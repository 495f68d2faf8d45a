"""Differentiable operations.

Each op computes its forward value with numpy and registers a closure that
maps the upstream gradient to one gradient per parent.  Broadcasting follows
numpy rules; gradients are summed back to each parent's shape.
"""

from __future__ import annotations

import builtins

import numpy as np

from revsent.autodiff.tensor import SliceGrad, Tensor, as_tensor, make_node
from revsent.errors import ShapeError

__all__ = [
    "add", "sub", "mul", "div", "matmul", "exp", "log", "relu", "tanh", "sigmoid",
    "softmax", "log_softmax", "sum", "mean", "concat", "stack", "getitem", "reshape",
    "transpose", "where", "dropout", "embedding_lookup", "conv1d", "max_over_time",
    "cross_entropy", "mse", "masked_softmax",
]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _operands(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.dtype))
    return as_tensor(a), as_tensor(b)


def _broadcast_check(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _operands(a, b)
    _broadcast_check(a, b, "add")

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_node(a.data + b.data, (a, b), back)


def sub(a, b) -> Tensor:
    a, b = _operands(a, b)
    _broadcast_check(a, b, "sub")

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_node(a.data - b.data, (a, b), back)


def mul(a, b) -> Tensor:
    a, b = _operands(a, b)
    _broadcast_check(a, b, "mul")

    def back(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return make_node(a.data * b.data, (a, b), back)


def div(a, b) -> Tensor:
    a, b = _operands(a, b)
    _broadcast_check(a, b, "div")
    out = a.data / b.data

    def back(g):
        ga = _unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None
        return ga, gb

    return make_node(out, (a, b), back)


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes with batch broadcasting.

    ``a`` may be ``(..., n, k)`` and ``b`` ``(k, m)`` or ``(..., k, m)``.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")

    def back(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        if b.requires_grad:
            if a.ndim > 2 and b.ndim == 2:
                k = a.shape[-1]
                gb = a.data.reshape(-1, k).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return make_node(a.data @ b.data, (a, b), back)


# ---------------------------------------------------------------------------
# unary nonlinearities
# ---------------------------------------------------------------------------

def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return make_node(out, (x,), lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    return make_node(np.log(x.data), (x,), lambda g: (g / x.data,))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    # np.maximum keeps NaN, so a diverged input is not silently zeroed
    return make_node(np.maximum(x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return make_node(out, (x,), lambda g: (g * (1 - out * out),))


def sigmoid(x: Tensor) -> Tensor:
    # tanh form is overflow-free for large |x|
    out = (0.5 * (1 + np.tanh(0.5 * x.data))).astype(x.dtype)
    return make_node(out, (x,), lambda g: (g * out * (1 - out),))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_node(out, (x,), back)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    p = np.exp(out)

    def back(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return make_node(out, (x,), back)


def masked_softmax(x: Tensor, mask: np.ndarray, axis: int = -1) -> Tensor:
    """Softmax that gives exactly zero weight where ``mask`` is false.

    A slice with no true entries comes out uniform; callers mask such slices
    at the next level.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise ShapeError(f"masked_softmax: mask {mask.shape} vs scores {x.shape}")
    empty = ~mask.any(axis=axis, keepdims=True)
    keep = mask | empty
    filled = np.where(keep, x.data, -np.inf)
    shifted = filled - filled.max(axis=axis, keepdims=True)
    e = np.where(keep, np.exp(shifted), 0).astype(x.dtype)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_node(out, (x,), back)


# ---------------------------------------------------------------------------
# reductions and shape manipulation
# ---------------------------------------------------------------------------

def _expand_reduced(g: np.ndarray, shape, axis, keepdims: bool) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g.reshape((1,) * len(shape)), shape)
    if not keepdims:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(a % len(shape) for a in axes)
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = np.asarray(x.data.sum(axis=axis, keepdims=keepdims))

    def back(g):
        return (np.array(_expand_reduced(g, x.shape, axis, keepdims)),)

    return make_node(out, (x,), back)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = np.asarray(x.data.mean(axis=axis, keepdims=keepdims))
    count = x.data.size // builtins.max(out.size, 1)

    def back(g):
        return (np.array(_expand_reduced(g, x.shape, axis, keepdims)) / count,)

    return make_node(out, (x,), back)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = [t.shape for t in tensors]
        raise ShapeError(f"concat along axis {axis}: incompatible shapes {shapes}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def back(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_node(out, tensors, back)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = [t.shape for t in tensors]
        raise ShapeError(f"stack: incompatible shapes {shapes}") from None

    def back(g):
        return tuple(np.moveaxis(g, axis, 0))

    return make_node(out, tensors, back)


def _is_basic_index(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


def getitem(x: Tensor, index) -> Tensor:
    out = x.data[index]
    basic = _is_basic_index(index)

    def back(g):
        if basic:
            return (SliceGrad(index, g, x.shape),)
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)

    return make_node(np.array(out) if basic else out, (x,), back)


def reshape(x: Tensor, shape) -> Tensor:
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {x.shape} as {tuple(shape)}") from None
    return make_node(out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes=None) -> Tensor:
    out = np.transpose(x.data, axes)
    inverse = None if axes is None else np.argsort(axes)
    return make_node(out, (x,), lambda g: (np.transpose(g, inverse),))


def where(cond: np.ndarray, a, b) -> Tensor:
    """Pick from ``a`` where ``cond`` else ``b``; ``cond`` is a constant mask."""
    a, b = _operands(a, b)
    cond = np.asarray(cond, dtype=bool)
    out = np.where(cond, a.data, b.data)

    def back(g):
        zero = np.zeros((), dtype=g.dtype)
        ga = _unbroadcast(np.where(cond, g, zero), a.shape) if a.requires_grad else None
        gb = _unbroadcast(np.where(cond, zero, g), b.shape) if b.requires_grad else None
        return ga, gb

    return make_node(out, (a, b), back)


# ---------------------------------------------------------------------------
# network layers
# ---------------------------------------------------------------------------

def dropout(x: Tensor, p: float, rng: np.random.Generator | None, training: bool = True) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-p) at train time."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout at train time needs an explicit rng")
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / np.asarray(1.0 - p, dtype=x.dtype)
    return make_node(x.data * keep, (x,), lambda g: (g * keep,))


def embedding_lookup(table: Tensor, ids, padding_idx: int | None = 0) -> Tensor:
    """Rows of ``table`` for integer ``ids`` of any shape.

    The padding row never receives gradient, so it stays at its initial value.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"embedding ids out of range [0, {table.shape[0]})")
    out = table.data[ids]

    def back(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        if padding_idx is not None:
            full[padding_idx] = 0
        return (full,)

    return make_node(out, (table,), back)


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1) -> Tensor:
    """1-D convolution over time.

    ``x`` is ``(B, L, E)``, ``weight`` is ``(K, W, E)`` for K filters of width W,
    output is ``(B, T, K)`` with ``T = (L - W) // stride + 1``.
    """
    if x.ndim != 3 or weight.ndim != 3:
        raise ShapeError(f"conv1d expects (B,L,E) input and (K,W,E) filters, got {x.shape}, {weight.shape}")
    B, L, E = x.shape
    K, W, E2 = weight.shape
    if E != E2:
        raise ShapeError(f"conv1d: input channels {x.shape} vs filters {weight.shape}")
    if L < W:
        raise ShapeError(f"conv1d: input length {L} shorter than filter width {W} ({x.shape} vs {weight.shape})")
    T = (L - W) // stride + 1
    starts = np.arange(T) * stride
    window = starts[:, None] + np.arange(W)[None, :]              # (T, W)
    cols = x.data[:, window, :].reshape(B, T, W * E)              # im2col
    wmat = weight.data.reshape(K, W * E).T                        # (W*E, K)
    out = cols @ wmat
    if bias is not None:
        out = out + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def back(g):
        gx = gw = gb = None
        if x.requires_grad:
            gcols = (g @ wmat.T).reshape(B, T, W, E)
            gx = np.zeros_like(x.data)
            for w in range(W):
                np.add.at(gx, (slice(None), starts + w), gcols[:, :, w, :])
        if weight.requires_grad:
            gw = (cols.reshape(-1, W * E).T @ g.reshape(-1, K)).T.reshape(K, W, E)
        if bias is not None and bias.requires_grad:
            gb = g.reshape(-1, K).sum(axis=0)
        return (gx, gw) if bias is None else (gx, gw, gb)

    return make_node(out, parents, back)


def max_over_time(x: Tensor, axis: int = 1) -> Tensor:
    """Max along ``axis``; the gradient goes to the first maximal position."""
    idx = np.argmax(x.data, axis=axis)
    out = np.take_along_axis(x.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def back(g):
        full = np.zeros_like(x.data)
        np.put_along_axis(full, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
        return (full,)

    return make_node(out, (x,), back)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean cross-entropy of ``(N, C)`` logits against integer class targets."""
    targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    if logits.ndim == 1:
        logits = reshape(logits, (1, -1))
    n, c = logits.shape
    if targets.shape != (n,):
        raise ShapeError(f"cross_entropy: {n} rows of logits vs targets {targets.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= c):
        raise ValueError(f"class index out of range for {c} classes: {targets.tolist()}")
    logp = log_softmax(logits, axis=-1)
    picked = getitem(logp, (np.arange(n), targets))
    return mul(mean(picked), -1.0)


def mse(pred: Tensor, target) -> Tensor:
    pred = as_tensor(pred)
    target = np.asarray(target, dtype=pred.dtype)
    if target.shape != pred.shape:
        try:
            target = target.reshape(pred.shape)
        except ValueError:
            raise ShapeError(f"mse: prediction {pred.shape} vs target {target.shape}") from None
    diff = sub(pred, Tensor(target, dtype=pred.dtype))
    return mean(mul(diff, diff))
