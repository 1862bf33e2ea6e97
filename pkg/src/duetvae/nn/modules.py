"""Parameter containers around the functional layers."""
from __future__ import annotations

import numpy as np

from .autograd import DTYPE, Param
from . import functional as F


def uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(DTYPE)


class Module:
    """Walks attributes in definition order to enumerate parameters."""

    def named_parameters(self, prefix=""):
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Param):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())


class Linear(Module):
    def __init__(self, n_in, n_out, rng):
        self.w = Param(uniform_init(rng, (n_in, n_out), n_in))
        self.b = Param(uniform_init(rng, (n_out,), n_in))

    def __call__(self, x):
        return F.linear_forward(x, self.w, self.b)


class LSTMLayer(Module):
    def __init__(self, n_in, hidden, rng):
        self.w_ih = Param(uniform_init(rng, (n_in, 4 * hidden), hidden))
        self.w_hh = Param(uniform_init(rng, (hidden, 4 * hidden), hidden))
        self.b = Param(uniform_init(rng, (4 * hidden,), hidden))

    def as_tuple(self):
        return self.w_ih, self.w_hh, self.b


class LSTM(Module):
    def __init__(self, n_in, hidden, num_layers, rng):
        self.layers = [LSTMLayer(n_in if i == 0 else hidden, hidden, rng) for i in range(num_layers)]

    def __call__(self, x, h0c0=None):
        return F.lstm_forward(x, [layer.as_tuple() for layer in self.layers], h0c0)


class MultiHeadAttention(Module):
    def __init__(self, d_model, n_heads, rng):
        if d_model % n_heads:
            raise ValueError(f"d_model {d_model} is not divisible by n_heads {n_heads}")
        self.n_heads = n_heads
        for name in ("q", "k", "v", "o"):
            setattr(self, "w" + name, Param(uniform_init(rng, (d_model, d_model), d_model)))
            setattr(self, "b" + name, Param(uniform_init(rng, (d_model,), d_model)))

    def __call__(self, query, key_value, causal_mask=False):
        return F.mha_forward(query, key_value, self, self.n_heads, causal_mask)


class ConvSmooth(Module):
    def __init__(self, kernel_size, channels, rng):
        if kernel_size % 2 == 0:
            raise ValueError(f"conv kernel width must be odd, got {kernel_size}")
        self.kernel = Param(uniform_init(rng, (kernel_size, channels), kernel_size))

    def __call__(self, x):
        return F.conv_smooth(x, self.kernel)


class LayerNorm(Module):
    def __init__(self, width):
        self.gamma = Param(np.ones(width, dtype=DTYPE))
        self.beta = Param(np.zeros(width, dtype=DTYPE))

    def __call__(self, x):
        return F.layer_norm(x, self.gamma, self.beta)
