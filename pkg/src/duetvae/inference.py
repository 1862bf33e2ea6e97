"""Autoregressive generation from a trained duet model.

Inputs and outputs are in raw (denormalized) coordinates; the model's stored
normalization statistics are applied internally.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError, StateError
from .model import DuetModel
from .nn.autograd import DTYPE, Tensor, no_grad
from .preprocess import normalize

DEFAULT_CONTEXT = 16


def _rng(rng):
    if rng is None or isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _stats(model):
    if model.norm_stats is None:
        raise StateError("model has no normalization statistics; train it or load a trained checkpoint")
    return model.norm_stats


def _flat(x):
    return x.reshape(len(x), 1, -1)


def rollout(decoder, start, length, memory_embedded):
    """Extend the normalized (t0, 1, F) prefix ``start`` to ``length`` frames,
    appending the decoder's next-frame prediction one frame at a time."""
    t0 = len(start)
    gen = np.empty((length,) + start.shape[1:], dtype=DTYPE)
    gen[:t0] = start
    for t in range(t0, length):
        pred = decoder(Tensor(gen[:t]), memory_embedded=memory_embedded)
        gen[t] = pred.data[t - 1]
    return gen


def generate_partner(model: DuetModel, leader, context, target_dancer=2, rng=None):
    """Generate the ``target_dancer``'s motion alongside ``leader``.

    ``leader`` is the other dancer's full (T, M, D) sequence and ``context``
    the first ``t0`` frames of the dancer being generated.  Returns (T, M, D)
    whose first ``t0`` frames are ``context`` unchanged.  The memory is
    computed once from the full leader sequence; VAE 3 sees the leader
    against the context held at its last frame.  ``rng`` (Generator or seed)
    drives latent sampling; ``None`` decodes the posterior means.
    """
    if target_dancer not in (1, 2):
        raise ValueError(f"target_dancer must be 1 or 2, got {target_dancer!r}")
    stats = _stats(model)
    cfg = model.config
    leader = np.asarray(leader, dtype=DTYPE)
    context = np.asarray(context, dtype=DTYPE)
    T, t0 = len(leader), len(context)
    if leader.ndim != 3 or context.ndim != 3 or leader.shape[1:] != context.shape[1:]:
        raise DimensionError(f"leader {leader.shape} and context {context.shape} must both be (T, M, D)")
    if leader.shape[1:] != (cfg.n_joints, cfg.n_dims):
        raise DimensionError(f"joint layout {leader.shape[1:]} does not match the model")
    if not 1 <= t0 < T:
        raise ValueError(f"context length must satisfy 1 <= t0 < T (t0={t0}, T={T})")
    rng = _rng(rng)
    sample = rng is not None

    lead_n = _flat(normalize(leader, stats))
    ctx_n = _flat(normalize(context, stats))
    proxy = np.concatenate([ctx_n, np.repeat(ctx_n[-1:], T - t0, axis=0)])
    lead_vae = model.vae(3 - target_dancer)
    decoder = model.decoder(target_dancer)
    with no_grad():
        o_lead, _ = lead_vae(Tensor(lead_n), rng=rng, sample=sample)
        o3, _ = model.vae3(Tensor(np.abs(lead_n - proxy)), rng=rng, sample=sample)
        memory = decoder.embed_memory(o_lead + o3)
        gen = rollout(decoder, ctx_n, T, memory)

    out = normalize(gen.reshape(T, cfg.n_joints, cfg.n_dims), stats, inverse=True)
    out[:t0] = context
    return out


def generate_duet(model: DuetModel, length, rng=None, context=DEFAULT_CONTEXT):
    """Unconditional duet: decode a standard-normal VAE 3 latent sequence into
    an interaction signal and roll both dancers out against it, starting
    from the mean pose held for ``min(context, length - 1)`` frames."""
    if length < 2:
        raise ValueError(f"duet length must be at least 2, got {length}")
    stats = _stats(model)
    cfg = model.config
    rng = _rng(rng)
    if rng is None:
        rng = np.random.default_rng()
    t0 = max(1, min(context, length - 1))
    z = rng.standard_normal((length, 1, cfg.latent_dim))
    start = np.zeros((t0, 1, cfg.features), dtype=DTYPE)
    outs = []
    with no_grad():
        interaction = model.vae3.decode(Tensor(z))
        for dancer in (1, 2):
            decoder = model.decoder(dancer)
            gen = rollout(decoder, start, length, decoder.embed_memory(interaction))
            outs.append(normalize(gen.reshape(length, cfg.n_joints, cfg.n_dims), stats, inverse=True))
    return outs[0], outs[1]
