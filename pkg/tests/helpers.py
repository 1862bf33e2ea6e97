"""Shared fixtures-by-function for the test modules."""
import numpy as np

from duetvae.ingest import ROOT_JOINT
from duetvae.model import ModelConfig
from duetvae.nn import Param, check_gradients

GRAD_TOL = 1e-4


def uniform_param(rng, shape, name, scale=0.5):
    return Param(rng.uniform(-scale, scale, size=shape), name=name)


def max_grad_error(loss_fn, tensors, h=1e-5):
    errors = check_gradients(loss_fn, tensors, h)
    return max(errors.values()), errors


def meets_motion_precondition(d1, d2):
    """Per-frame root motion of each dancer stays under half their closest approach."""
    r1, r2 = np.asarray(d1)[:, ROOT_JOINT], np.asarray(d2)[:, ROOT_JOINT]
    gap = np.min(np.linalg.norm(r1 - r2, axis=-1))
    step = max(np.max(np.linalg.norm(np.diff(r, axis=0), axis=-1)) for r in (r1, r2))
    return bool(step < gap / 2)


def tiny_config(**overrides):
    # the smallest layout used for finite-difference checks of whole modules
    base = dict(n_joints=2, n_dims=3, d_model=8, n_heads=1, latent_dim=4, lstm_layers=2,
                conv_kernel=3, decoder_layers=1, ff_dim=16)
    base.update(overrides)
    return ModelConfig(**base)


def small_config(**overrides):
    base = dict(n_joints=4, n_dims=3, d_model=16, n_heads=2, latent_dim=8, lstm_layers=2,
                conv_kernel=5, decoder_layers=1, ff_dim=32)
    base.update(overrides)
    return ModelConfig(**base)


def numpy_lstm(x, layers):
    """Plain loop LSTM, gate order input, forget, candidate, output."""
    def sig(a):
        return 1.0 / (1.0 + np.exp(-a))

    seq = x
    for w_ih, w_hh, b in layers:
        H = w_hh.shape[0]
        h = np.zeros((x.shape[1], H))
        c = np.zeros((x.shape[1], H))
        outs = []
        for t in range(len(seq)):
            z = seq[t] @ w_ih + h @ w_hh + b
            i, f, g, o = sig(z[:, :H]), sig(z[:, H:2 * H]), np.tanh(z[:, 2 * H:3 * H]), sig(z[:, 3 * H:])
            c = f * c + i * g
            h = o * np.tanh(c)
            outs.append(h)
        seq = np.stack(outs)
    return seq
