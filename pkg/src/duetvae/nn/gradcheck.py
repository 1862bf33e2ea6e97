"""Central finite differences, used as the independent gradient oracle."""
from __future__ import annotations

import numpy as np

from ..errors import NumericError


def finite_difference_gradient(f, x, h=1e-5):
    """Central-difference gradient of scalar ``f`` at array ``x``.

    ``x`` is perturbed in place one coordinate at a time and restored.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.asarray(x)
    grad = np.zeros(x.shape, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite function value while perturbing coordinate {i}")
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic, numeric, floor=1e-6):
    """Largest elementwise ``|a - n| / max(|a|, |n|, floor)``.

    The floor keeps coordinates whose true gradient is zero (both sides at
    round-off level) from dominating the ratio.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def check_gradients(loss_fn, tensors, h=1e-5):
    """Compare backprop against finite differences for every tensor.

    ``loss_fn`` builds a fresh scalar Tensor from the current values of
    ``tensors`` (which must have ``requires_grad``).  Returns a dict of
    ``name -> max relative error``.
    """
    for t in tensors:
        t.grad = np.zeros_like(t.data)
    loss = loss_fn()
    loss.backward()
    analytic = [t.grad.copy() for t in tensors]

    errors = {}
    for i, (t, a) in enumerate(zip(tensors, analytic)):
        def f(_, t=t):
            return loss_fn().item()

        numeric = finite_difference_gradient(f, t.data, h)
        errors[t.name or f"tensor{i}"] = relative_error(a, numeric)
    return errors
