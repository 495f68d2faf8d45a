"""Parameter containers used by the encoders, heads and the MLP baseline."""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from revsent.autodiff import ops
from revsent.autodiff.tensor import Tensor, get_default_dtype


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(np.asarray(data, dtype=get_default_dtype()), requires_grad=True, name=name)


def uniform(rng: np.random.Generator, shape, bound: float) -> Tensor:
    return parameter(rng.uniform(-bound, bound, size=shape))


class Module:
    """Holds parameters and child modules in attribute-assignment order.

    ``named_parameters`` yields dotted names in a deterministic order, which is
    what the checkpoint format relies on.  Frozen tensors (``requires_grad``
    off) are still parameters for checkpointing but are left out of
    ``trainable_parameters``.
    """

    training: bool = True

    def __setattr__(self, key, value):
        if isinstance(value, (Tensor, Module)) or key == "_children":
            if "_children" not in self.__dict__:
                object.__setattr__(self, "_children", OrderedDict())
            if key != "_children":
                self._children[key] = value
        elif "_children" in self.__dict__ and key in self._children:
            del self._children[key]
        object.__setattr__(self, key, value)

    def named_parameters(self, prefix: str = ""):
        for key, child in self.__dict__.get("_children", {}).items():
            name = f"{prefix}{key}"
            if isinstance(child, Tensor):
                yield name, child
            else:
                yield from child.named_parameters(prefix=name + ".")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def trainable_parameters(self) -> list[Tensor]:
        return [p for p in self.parameters() if p.requires_grad]

    def modules(self):
        yield self
        for child in self.__dict__.get("_children", {}).values():
            if isinstance(child, Module):
                yield from child.modules()

    def train(self, mode: bool = True):
        for m in self.modules():
            object.__setattr__(m, "training", mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, v.data.copy()) for k, v in self.named_parameters())

    def load_state_dict(self, state) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        unexpected = set(state) - set(own)
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}")
        for k, p in own.items():
            value = np.asarray(state[k])
            if value.shape != p.shape:
                raise ValueError(f"{k}: checkpoint shape {value.shape} vs parameter {p.shape}")
            p.data = value.astype(p.dtype).copy()


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        bound = 1.0 / np.sqrt(n_in)
        self.weight = uniform(rng, (n_in, n_out), bound)
        self.bias = uniform(rng, (n_out,), bound)
        self.n_in, self.n_out = n_in, n_out

    def __call__(self, x: Tensor) -> Tensor:
        return ops.add(ops.matmul(x, self.weight), self.bias)
