"""Reconstruction, KL and velocity losses plus their weighted total."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import DimensionError
from .nn.autograd import Tensor, as_tensor, exp, l2norm


@dataclass(frozen=True)
class LossBreakdown:
    l_mse: float
    l_velocity: float
    l_kl: float
    total: float
    mode: str = "full"


def mse_loss(pred, target):
    """Mean of squared differences over every element."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction {pred.shape} and target {target.shape} differ")
    diff = pred - target
    return (diff * diff).mean()


def kl_loss(mu, log_var):
    """KL(N(mu, sigma^2) || N(0, I)) summed over the last (latent) axis and
    averaged over any leading axes."""
    mu, log_var = as_tensor(mu), as_tensor(log_var)
    if mu.shape != log_var.shape:
        raise DimensionError(f"mu {mu.shape} and log_var {log_var.shape} differ")
    per = (mu * mu + exp(log_var) - log_var - 1.0).sum(axis=-1) * 0.5
    return per.mean() if per.ndim else per


def velocity_loss(pred, frames=1):
    """Mean L2 norm of the change in frame-to-frame velocity ``frames`` apart.

    ``pred`` is (T, M, D) or (B, T, M, D); the norm runs over each frame's
    M*D coordinates.
    """
    pred = as_tensor(pred)
    if pred.ndim < 3:
        raise DimensionError(f"velocity loss needs (T, M, D) or (B, T, M, D), got {pred.shape}")
    if frames < 1:
        raise ValueError("frames must be >= 1")
    T = pred.shape[-3]
    if T < frames + 2:
        raise ValueError(f"velocity loss with frames={frames} needs T >= {frames + 2}, got {T}")
    lead = (slice(None),) * (pred.ndim - 3)
    v = pred[lead + (slice(1, None),)] - pred[lead + (slice(None, -1),)]
    dv = v[lead + (slice(frames, None),)] - v[lead + (slice(None, -frames),)]
    return l2norm(dv, axis=(-2, -1)).mean()


def total_loss(parts, cfg) -> LossBreakdown:
    """Weighted sum ``alpha*mse + beta*velocity + eta*kl``.

    ``parts`` is a mapping or object with ``l_mse``, ``l_velocity`` and
    ``l_kl`` (floats); ``cfg`` supplies ``alpha``, ``beta``, ``eta``.
    """
    get = parts.get if isinstance(parts, dict) else lambda k, d=0.0: getattr(parts, k, d)
    mse, vel, kl = (float(get(k, 0.0)) for k in ("l_mse", "l_velocity", "l_kl"))
    mode = get("mode", "full")
    return LossBreakdown(mse, vel, kl, cfg.alpha * mse + cfg.beta * vel + cfg.eta * kl, mode)


def weighted_total(l_mse: Tensor, l_velocity, l_kl: Tensor, cfg) -> Tensor:
    """Differentiable counterpart of ``total_loss``."""
    out = l_mse * cfg.alpha + l_kl * cfg.eta
    if l_velocity is not None:
        out = out + l_velocity * cfg.beta
    return out
