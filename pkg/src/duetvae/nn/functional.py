"""Differentiable building blocks written against the autograd engine.

Sequence tensors use the time-major layout ``(T, B, features)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError
from .autograd import DTYPE, Tensor, as_tensor, exp, sigmoid, softmax, sqrt, stack, tanh


def positional_encoding(length: int, width: int) -> np.ndarray:
    """Sinusoidal position table of shape ``(length, width)``.

    Even columns hold ``sin(pos / 10000**(2i/width))`` and odd columns the
    matching cosine.
    """
    if length < 1 or width < 1:
        raise ValueError("length and width must be positive")
    if width % 2:
        raise ValueError(f"positional encoding width must be even, got {width}")
    pos = np.arange(length, dtype=DTYPE)[:, None]
    two_i = np.arange(0, width, 2, dtype=DTYPE)
    angle = pos / np.power(10000.0, two_i / width)
    pe = np.empty((length, width), dtype=DTYPE)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe


def linear_forward(x, w, b=None):
    """``x @ w + b`` over the trailing axis."""
    x = as_tensor(x)
    if x.shape[-1] != w.shape[0]:
        raise DimensionError(f"linear: input width {x.shape[-1]} does not match weight rows {w.shape[0]}")
    if b is not None and b.shape != (w.shape[1],):
        raise DimensionError(f"linear: bias shape {b.shape} does not match output width {w.shape[1]}")
    lead = x.shape[:-1]
    y = x.reshape(-1, x.shape[-1]) @ w if x.ndim != 2 else x @ w
    if b is not None:
        y = y + b
    return y.reshape(*lead, w.shape[1]) if x.ndim != 2 else y


def lstm_forward(x, layers, h0c0=None):
    """Stacked LSTM over a ``(T, B, d)`` input.

    ``layers`` is a sequence of ``(w_ih, w_hh, b)`` triples with gate blocks
    ordered input, forget, candidate, output.  Returns the top layer's
    hidden states ``(T, B, H)`` and the final ``(h, c)`` of every layer.
    """
    x = as_tensor(x)
    if x.ndim != 3:
        raise DimensionError(f"lstm expects a (T, B, d) input, got shape {x.shape}")
    T, B, _ = x.shape
    finals = []
    seq = x
    for li, (w_ih, w_hh, b) in enumerate(layers):
        H = w_hh.shape[0]
        if seq.shape[-1] != w_ih.shape[0] or w_ih.shape[1] != 4 * H or w_hh.shape[1] != 4 * H:
            raise DimensionError(f"lstm layer {li}: weight shapes do not conform to input width {seq.shape[-1]}")
        if h0c0 is not None:
            h, c = (as_tensor(s) for s in h0c0[li])
        else:
            h = Tensor(np.zeros((B, H), dtype=DTYPE))
            c = Tensor(np.zeros((B, H), dtype=DTYPE))
        # input contribution for every step in one product
        xw = linear_forward(seq, w_ih, b)
        outs = []
        for t in range(T):
            gates = xw[t] + h @ w_hh
            sg = sigmoid(gates)
            i = sg[:, :H]
            f = sg[:, H:2 * H]
            o = sg[:, 3 * H:]
            g = tanh(gates[:, 2 * H:3 * H])
            c = f * c + i * g
            h = o * tanh(c)
            outs.append(h)
        seq = stack(outs, axis=0)
        finals.append((h, c))
    return seq, finals


def mha_forward(query, key_value, params, n_heads, causal_mask=False, return_weights=False):
    """Multi-head scaled dot-product attention.

    ``query`` is ``(Tq, B, d)`` and ``key_value`` is ``(Tk, B, d)``.
    ``params`` provides ``wq, bq, wk, bk, wv, bv, wo, bo``.  With
    ``causal_mask`` query position ``t`` only sees key positions ``<= t``.
    """
    query = as_tensor(query)
    key_value = as_tensor(key_value)
    if query.ndim != 3 or key_value.ndim != 3:
        raise DimensionError("attention inputs must be (T, B, d)")
    Tq, B, d = query.shape
    Tk = key_value.shape[0]
    if key_value.shape[1] != B or key_value.shape[2] != d:
        raise DimensionError(f"query {query.shape} and key/value {key_value.shape} do not conform")
    if d % n_heads:
        raise DimensionError(f"model width {d} is not divisible by {n_heads} heads")
    dh = d // n_heads

    def heads(t, n):
        # (n, B, d) -> (B, H, n, dh)
        return t.reshape(n, B, n_heads, dh).transpose(1, 2, 0, 3)

    q = heads(linear_forward(query, params.wq, params.bq), Tq)
    k = heads(linear_forward(key_value, params.wk, params.bk), Tk)
    v = heads(linear_forward(key_value, params.wv, params.bv), Tk)
    scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(dh))
    mask = None
    if causal_mask:
        mask = np.triu(np.ones((Tq, Tk), dtype=bool), k=1)
    weights = softmax(scores, axis=-1, mask=mask)
    ctx = (weights @ v).transpose(2, 0, 1, 3).reshape(Tq, B, d)
    out = linear_forward(ctx, params.wo, params.bo)
    if return_weights:
        return out, weights
    return out


def conv_smooth(x, kernel):
    """Depthwise 1-D cross-correlation along time with edge replication.

    ``x`` is ``(T, B, C)``; ``kernel`` has shape ``(k,)`` (shared by all
    channels) or ``(k, C)``, with ``k`` odd.  Output keeps length ``T``.
    """
    x = as_tensor(x)
    kernel = as_tensor(kernel)
    k = kernel.shape[0]
    if k % 2 == 0:
        raise ValueError(f"conv kernel width must be odd, got {k}")
    if x.ndim != 3:
        raise DimensionError(f"conv_smooth expects (T, B, C), got {x.shape}")
    T, _, C = x.shape
    if kernel.ndim == 2 and kernel.shape[1] != C:
        raise DimensionError(f"kernel has {kernel.shape[1]} channels, input has {C}")
    half = k // 2
    idx = np.clip(np.arange(T)[:, None] + np.arange(-half, half + 1)[None, :], 0, T - 1)
    windows = x[idx]  # (T, k, B, C)
    w = kernel.reshape(1, k, 1, 1) if kernel.ndim == 1 else kernel.reshape(1, k, 1, C)
    return (windows * w).sum(axis=1)


def layer_norm(x, gamma, beta, eps=1e-5):
    x = as_tensor(x)
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    return xc / sqrt(var + eps) * gamma + beta


@dataclass
class VaeLatent:
    mu: Tensor
    sigma: Tensor
    z: Tensor
    eps: np.ndarray
    log_var: Tensor


def reparameterize(mu, log_var, rng=None, eps=None) -> VaeLatent:
    """Sample ``z = mu + sigma * eps`` with ``sigma = exp(log_var / 2)``.

    ``eps`` is drawn from ``rng`` (a ``numpy.random.Generator``) unless given
    explicitly; it is a constant, so gradients reach only ``mu`` and
    ``log_var``.
    """
    mu = as_tensor(mu)
    log_var = as_tensor(log_var)
    if mu.shape != log_var.shape:
        raise DimensionError(f"mu {mu.shape} and log_var {log_var.shape} differ")
    if eps is None:
        if rng is None:
            raise ValueError("either rng or eps is required")
        eps = rng.standard_normal(mu.shape)
    eps = np.asarray(eps, dtype=DTYPE)
    sigma = exp(log_var * 0.5)
    z = mu + sigma * eps
    return VaeLatent(mu=mu, sigma=sigma, z=z, eps=eps, log_var=log_var)
