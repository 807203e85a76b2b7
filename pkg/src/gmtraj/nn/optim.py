"""Adam with bias-corrected moments."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autograd import ShapeError, Tensor

__all__ = ["AdamState", "Adam", "adam_step"]


@dataclass
class AdamState:
    lr: float = 0.01
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
    """Return updated copies of ``params``; ``state`` moments advance in place."""
    if len(params) != len(grads):
        raise ShapeError(f"adam_step: {len(params)} params but {len(grads)} gradients")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    b1, b2 = state.betas
    state.step += 1
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    out = []
    for k, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape or state.m[k].shape != p.shape:
            raise ShapeError(f"adam_step: parameter {k} has shape {p.shape}, gradient {g.shape}")
        state.m[k] = b1 * state.m[k] + (1.0 - b1) * g
        state.v[k] = b2 * state.v[k] + (1.0 - b2) * g * g
        m_hat = state.m[k] / c1
        v_hat = state.v[k] / c2
        out.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return out


class Adam:
    """Optimizer bound to a fixed list of parameter tensors."""

    def __init__(self, params: list[Tensor], lr: float = 0.01, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, betas=tuple(betas), eps=eps)

    def step(self, grads: list[np.ndarray]) -> None:
        new = adam_step(self.state, [p.data for p in self.params], grads)
        for p, value in zip(self.params, new):
            p.data = value
