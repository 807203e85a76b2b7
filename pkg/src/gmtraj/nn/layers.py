"""Parameter containers and the few layers the network needs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autograd import ShapeError, Tensor, add, conv_2d, matmul, mul, relu, sigmoid, take, tanh

__all__ = [
    "xavier_uniform",
    "parameter",
    "Linear",
    "Conv2d",
    "LSTMParams",
    "lstm_cell",
]


def xavier_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def parameter(value, name: str) -> Tensor:
    return Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)


class Linear:
    """Affine map ``x @ W + b`` for row-major batches."""

    def __init__(self, weight: Tensor, bias: Tensor):
        self.weight = weight
        self.bias = bias

    @classmethod
    def init(cls, rng: np.random.Generator, n_in: int, n_out: int, name: str) -> "Linear":
        w = parameter(xavier_uniform(rng, (n_in, n_out), n_in, n_out), f"{name}.weight")
        b = parameter(np.zeros(n_out), f"{name}.bias")
        return cls(w, b)

    def __call__(self, x: Tensor) -> Tensor:
        return add(matmul(x, self.weight), self.bias)

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]


class Conv2d:
    def __init__(self, weight: Tensor, bias: Tensor, padding: str = "same"):
        self.weight = weight
        self.bias = bias
        self.padding = padding

    @classmethod
    def init(cls, rng: np.random.Generator, c_in: int, c_out: int, k: int, name: str, padding: str = "same") -> "Conv2d":
        fan_in, fan_out = c_in * k * k, c_out * k * k
        w = parameter(xavier_uniform(rng, (c_out, c_in, k, k), fan_in, fan_out), f"{name}.weight")
        b = parameter(np.zeros(c_out), f"{name}.bias")
        return cls(w, b, padding)

    def __call__(self, x: Tensor) -> Tensor:
        return conv_2d(x, self.weight, self.bias, padding=self.padding)

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]


@dataclass
class LSTMParams:
    """Gate weights stacked as ``[input | forget | candidate | output]`` columns."""

    w_x: Tensor  # (n_in, 4H)
    w_h: Tensor  # (H, 4H)
    b: Tensor  # (4H,)

    @property
    def hidden(self) -> int:
        return self.w_h.shape[0]

    @classmethod
    def init(cls, rng: np.random.Generator, n_in: int, hidden: int, name: str) -> "LSTMParams":
        return cls(
            w_x=parameter(xavier_uniform(rng, (n_in, 4 * hidden), n_in, 4 * hidden), f"{name}.w_x"),
            w_h=parameter(xavier_uniform(rng, (hidden, 4 * hidden), hidden, 4 * hidden), f"{name}.w_h"),
            b=parameter(np.zeros(4 * hidden), f"{name}.b"),
        )

    def parameters(self) -> list[Tensor]:
        return [self.w_x, self.w_h, self.b]


def lstm_cell(x: Tensor, state: tuple[Tensor, Tensor], params: LSTMParams) -> tuple[Tensor, Tensor]:
    h, c = state
    hid = params.hidden
    if x.shape[-1] != params.w_x.shape[0] or h.shape[-1] != hid or c.shape != h.shape:
        raise ShapeError(
            f"lstm_cell: input {x.shape} / state {h.shape},{c.shape} incompatible with "
            f"weights {params.w_x.shape},{params.w_h.shape}"
        )
    z = add(add(matmul(x, params.w_x), matmul(h, params.w_h)), params.b)
    i = sigmoid(take(z, (slice(None), slice(0, hid))))
    f = sigmoid(take(z, (slice(None), slice(hid, 2 * hid))))
    g = tanh(take(z, (slice(None), slice(2 * hid, 3 * hid))))
    o = sigmoid(take(z, (slice(None), slice(3 * hid, 4 * hid))))
    c_next = add(mul(f, c), mul(i, g))
    h_next = mul(o, tanh(c_next))
    return h_next, c_next

