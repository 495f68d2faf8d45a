from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from revsent.autodiff.tensor import Tensor
from revsent.errors import TrainingError


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


class Adam:
    """Bias-corrected Adam.

    With ``weight_decay > 0`` the decay is decoupled from the adaptive step
    (the AdamW variant): ``theta -= lr * weight_decay * theta``.
    ``clip_norm`` rescales the global gradient norm and is off by default.
    """

    def __init__(self, params, lr: float = 1e-4, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0, clip_norm: float | None = None):
        self.params: list[Tensor] = list(params)
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps, weight_decay=weight_decay)
        self.state.m = [np.zeros_like(p.data) for p in self.params]
        self.state.v = [np.zeros_like(p.data) for p in self.params]
        self.clip_norm = clip_norm

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        grads = [np.zeros_like(p.data) if p.grad is None else p.grad for p in self.params]
        for p, g in zip(self.params, grads):
            if not np.all(np.isfinite(g)):
                label = p.name or f"parameter of shape {p.shape}"
                raise TrainingError(f"non-finite gradient for {label}; step aborted")
        if self.clip_norm is not None:
            total = float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads)))
            if total > self.clip_norm:
                scale = self.clip_norm / (total + 1e-12)
                grads = [g * scale for g in grads]

        s = self.state
        s.t += 1
        c1 = 1.0 - s.beta1 ** s.t
        c2 = 1.0 - s.beta2 ** s.t
        for p, g, m, v in zip(self.params, grads, s.m, s.v):
            m *= s.beta1
            m += (1.0 - s.beta1) * g
            v *= s.beta2
            v += (1.0 - s.beta2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + s.eps)
            if s.weight_decay > 0:
                update = update + s.weight_decay * p.data
            p.data = (p.data - s.lr * update).astype(p.dtype, copy=False)


def adam_step(params, state: AdamState) -> None:
    """Functional form: apply one Adam update to ``params`` using their ``.grad``."""
    opt = Adam.__new__(Adam)
    opt.params = list(params)
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in opt.params]
        state.v = [np.zeros_like(p.data) for p in opt.params]
    opt.state = state
    opt.clip_norm = None
    opt.step()
