"""Dense tensor with a reverse-mode gradient tape.

Every differentiable operation that touches a tensor with ``requires_grad``
records a node carrying its parents and a backward closure.  Nodes get a
monotonically increasing sequence number at creation, so sorting reachable
nodes by that number in reverse is a valid reverse-topological order and each
node is visited exactly once during :func:`backward`.
"""

from __future__ import annotations

import contextlib
import itertools
import threading
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from revsent.errors import ShapeError

_state = threading.local()
_sequence = itertools.count()


def get_default_dtype() -> np.dtype:
    return getattr(_state, "dtype", np.dtype(np.float32))


def set_default_dtype(dtype) -> None:
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dtype}; use float32 or float64")
    _state.dtype = dtype


@contextlib.contextmanager
def default_dtype(dtype):
    """Temporarily switch the floating dtype used for new tensors."""
    previous = get_default_dtype()
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _state.dtype = previous


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextlib.contextmanager
def no_grad():
    """Disable tape recording (inference, evaluation)."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """A numpy array that can take part in reverse-mode differentiation."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward", "_seq")

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype.kind in "biuf":
            arr = arr.astype(get_default_dtype(), copy=False)
        else:
            raise TypeError(f"cannot build a Tensor from dtype {arr.dtype}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self._seq = next(_sequence)

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __len__(self) -> int:
        return self.shape[0]

    # -- operator sugar (implementations live in ops) ---------------------
    def __add__(self, other):
        from revsent.autodiff import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from revsent.autodiff import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from revsent.autodiff import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from revsent.autodiff import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from revsent.autodiff import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from revsent.autodiff import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from revsent.autodiff import ops
        return ops.getitem(self, index)

    def reshape(self, *shape):
        from revsent.autodiff import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def sum(self, axis=None, keepdims: bool = False):
        from revsent.autodiff import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from revsent.autodiff import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def backward(self) -> None:
        backward(self)


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class SliceGrad:
    """Gradient that is zero except at a basic ``index`` of a parent of ``shape``.

    The tape scatters it into one buffer per parent instead of materialising
    a full-size array for every slice of a long sequence.
    """

    __slots__ = ("index", "value", "shape")

    def __init__(self, index, value: np.ndarray, shape: tuple[int, ...]):
        self.index, self.value, self.shape = index, value, shape


def make_node(data: np.ndarray, parents: Iterable[Tensor], backward_fn: BackwardFn) -> Tensor:
    """Wrap an op result, recording a tape node when any parent needs grads."""
    parents = tuple(parents)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out._seq = next(_sequence)
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _collect(root: Tensor) -> list[Tensor]:
    seen: set[int] = set()
    nodes: list[Tensor] = []
    stack = [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        nodes.append(node)
        stack.extend(p for p in node._parents if p.requires_grad)
    nodes.sort(key=lambda t: t._seq, reverse=True)
    return nodes


def backward(loss: Tensor, retain_intermediate: bool = False) -> None:
    """Populate ``.grad`` on every leaf that contributed to ``loss``.

    Leaf gradients accumulate (``+=``) across calls; intermediate gradients
    are dropped unless ``retain_intermediate`` is set.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    owned: set[int] = set()  # buffers allocated here, safe to update in place
    for node in _collect(loss):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None or retain_intermediate:
            node.grad = g.copy() if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if isinstance(pg, SliceGrad):
                if key not in owned:
                    base = grads.get(key)
                    grads[key] = np.zeros(pg.shape, dtype=pg.value.dtype) if base is None else base.copy()
                    owned.add(key)
                grads[key][pg.index] += pg.value
            elif key not in grads:
                grads[key] = pg
            elif key in owned:
                grads[key] += pg
            else:
                grads[key] = grads[key] + pg
                owned.add(key)
