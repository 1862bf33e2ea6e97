"""Probability-alternating training with Adam and cosine learning-rate annealing.

Each step draws ``u ~ U[0, 1)``.  With ``u < p`` the step is FOCUSED: only
the two per-dancer VAEs are updated, on reconstruction and KL.  Otherwise
the step is FULL: the whole duet forward pass is supervised on next-frame
prediction with the weighted MSE + velocity + KL objective.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .checkpoint import save_checkpoint
from .errors import NoDataError, NumericError
from .losses import LossBreakdown, kl_loss, mse_loss, total_loss, velocity_loss, weighted_total
from .model import DuetModel, duet_forward, from_time_major, to_time_major
from .preprocess import (
    JointSequence,
    compute_norm_stats,
    gaussian_augment,
    normalize,
    sliding_windows,
    teacher_forcing_pair,
)
from .seqio import atomic_write_text

log = logging.getLogger(__name__)

FOCUSED = "focused"
FULL = "full"


@dataclass
class TrainConfig:
    T: int = 64
    p: float = 0.1
    alpha: float = 0.5
    beta: float = 0.05
    eta: float = 0.00005
    frames: int = 1
    lr: float = 0.001
    betas: tuple = (0.9, 0.999)
    t_max: int = 100
    epochs: int = 100
    noise_sigma: float = 0.01
    seed: int = 0
    batch_size: int = 8
    stride: int = 32
    target_dancer: object = "both"
    adam_eps: float = 1e-8

    def __post_init__(self):
        self.betas = tuple(float(b) for b in self.betas)
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        for name in ("alpha", "beta", "eta", "noise_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.frames < 1 or self.T < self.frames + 2:
            raise ValueError("need frames >= 1 and T >= frames + 2")
        if self.t_max < 1 or self.epochs < 0 or self.batch_size < 1 or self.stride < 1:
            raise ValueError("t_max, batch_size and stride must be positive; epochs non-negative")
        if self.target_dancer not in (1, 2, "both"):
            raise ValueError("target_dancer must be 1, 2 or 'both'")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training options: {', '.join(sorted(unknown))}")
        return cls(**d)


def cosine_lr(epoch, cfg, lr_min=0.0):
    """Cosine annealing from ``cfg.lr`` at epoch 0 to ``lr_min`` at ``cfg.t_max``."""
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    if epoch >= cfg.t_max:
        return lr_min
    return lr_min + 0.5 * (cfg.lr - lr_min) * (1.0 + math.cos(math.pi * epoch / cfg.t_max))


# -- Adam ----------------------------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_update(param, state: AdamState | None, lr, betas=(0.9, 0.999), eps=1e-8):
    """One bias-corrected Adam step on ``param`` in place; returns the new state."""
    g = param.grad
    if not np.all(np.isfinite(g)):
        raise NumericError(f"non-finite gradient in parameter {param.name!r}")
    if state is None:
        state = AdamState(np.zeros_like(param.data), np.zeros_like(param.data))
    b1, b2 = betas
    state.t += 1
    state.m = b1 * state.m + (1.0 - b1) * g
    state.v = b2 * state.v + (1.0 - b2) * g * g
    m_hat = state.m / (1.0 - b1 ** state.t)
    v_hat = state.v / (1.0 - b2 ** state.t)
    param.values = param.data - lr * m_hat / (np.sqrt(v_hat) + eps)
    return state


class Adam:
    def __init__(self, betas=(0.9, 0.999), eps=1e-8):
        self.betas = betas
        self.eps = eps
        self.state = {}

    def step(self, params, lr):
        # check everything first so a bad gradient leaves all weights untouched
        for p in params:
            if not np.all(np.isfinite(p.grad)):
                raise NumericError(f"non-finite gradient in parameter {p.name!r}")
        for p in params:
            self.state[p.name] = adam_update(p, self.state.get(p.name), lr, self.betas, self.eps)


# -- steps ---------------------------------------------------------------------

def choose_mode(rng, p):
    return FOCUSED if rng.random() < p else FULL


def _focused_losses(model, X1, X2, rng):
    cfg = model.config
    parts_mse, parts_kl = [], []
    for vae, x in ((model.vae1, X1), (model.vae2, X2)):
        xt, batched = to_time_major(x, cfg)
        recon, lat = vae(xt, rng=rng)
        parts_mse.append(mse_loss(from_time_major(recon, cfg, batched), x))
        parts_kl.append(kl_loss(lat.mu, lat.log_var))
    return parts_mse[0] + parts_mse[1], None, parts_kl[0] + parts_kl[1]


def _full_losses(model, X1, X2, Y1, Y2, cfg, rng):
    out = duet_forward(model, X1, X2, cfg.target_dancer, rng)
    targets = {1: Y1, 2: Y2}
    l_mse = l_vel = None
    for dancer, pred in out.predictions.items():
        m = mse_loss(pred, targets[dancer])
        v = velocity_loss(pred, cfg.frames)
        l_mse = m if l_mse is None else l_mse + m
        l_vel = v if l_vel is None else l_vel + v
    l_kl = None
    for lat in out.latents:
        k = kl_loss(lat.mu, lat.log_var)
        l_kl = k if l_kl is None else l_kl + k
    return l_mse, l_vel, l_kl


def train_step(model: DuetModel, batch, cfg: TrainConfig, rng, optimizer: Adam | None = None, lr=None,
               mode=None) -> LossBreakdown:
    """One optimization step on ``batch = (w1, w2)``, two (B, T+1, M, D)
    normalized windows.  ``mode`` forces a branch instead of drawing one.

    Without ``optimizer`` a fresh Adam is used, so moment estimates do not
    carry over between calls.
    """
    optimizer = optimizer or Adam(cfg.betas, cfg.adam_eps)
    lr = cfg.lr if lr is None else lr
    w1, w2 = (np.asarray(w, dtype=np.float64) for w in batch)
    X1, Y1 = teacher_forcing_pair(w1)
    X2, Y2 = teacher_forcing_pair(w2)
    if mode is None:
        mode = choose_mode(rng, cfg.p)

    if mode == FOCUSED:
        params = model.group("vae1", "vae2")
        l_mse, l_vel, l_kl = _focused_losses(model, X1, X2, rng)
    else:
        params = model.parameters()
        l_mse, l_vel, l_kl = _full_losses(model, X1, X2, Y1, Y2, cfg, rng)

    for p in params:
        p.zero_grad()
    loss = weighted_total(l_mse, l_vel, l_kl, cfg)
    loss.backward()
    optimizer.step(params, lr)
    parts = {"l_mse": l_mse.item(), "l_velocity": 0.0 if l_vel is None else l_vel.item(),
             "l_kl": l_kl.item(), "mode": mode}
    return total_loss(parts, cfg)


# -- epochs --------------------------------------------------------------------

@dataclass
class EpochRecord:
    epoch: int
    l_mse: float
    l_velocity: float
    l_kl: float
    total: float
    mode_fraction: float
    lr: float = 0.0


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)
    steps: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "l_mse", "l_velocity", "l_kl", "total", "mode_fraction"])
        for r in self.epochs:
            w.writerow([r.epoch, repr(r.l_mse), repr(r.l_velocity), repr(r.l_kl), repr(r.total),
                        repr(r.mode_fraction)])
        return buf.getvalue()

    def write_csv(self, path):
        atomic_write_text(path, self.to_csv())


def _as_array(seq):
    return seq.data if isinstance(seq, JointSequence) else np.asarray(seq, dtype=np.float64)


def build_windows(dataset, stats, cfg):
    """Normalized (N, T+1, M, D) windows for each dancer over all duets."""
    w1, w2 = [], []
    for a, b in dataset:
        a = normalize(_as_array(a), stats)
        b = normalize(_as_array(b), stats)
        w1.append(sliding_windows(a, cfg.T + 1, cfg.stride))
        w2.append(sliding_windows(b, cfg.T + 1, cfg.stride))
    w1 = np.concatenate(w1) if w1 else np.empty((0,))
    w2 = np.concatenate(w2) if w2 else np.empty((0,))
    return w1, w2


def train(model: DuetModel, dataset, cfg: TrainConfig, checkpoint_path=None, checkpoint_every_epoch=False,
          on_epoch=None) -> TrainReport:
    """Train ``model`` on ``dataset``, a list of raw-coordinate duets ``(dancer1, dancer2)``.

    Normalization statistics are computed from ``dataset`` when the model
    has none.  Batches are reshuffled every epoch from the seeded generator
    and perturbed with Gaussian noise of std ``cfg.noise_sigma``.
    """
    dataset = list(dataset)
    if not dataset:
        raise NoDataError("training needs at least one duet")
    if model.norm_stats is None:
        model.norm_stats = compute_norm_stats([_as_array(s) for pair in dataset for s in pair])
    w1, w2 = build_windows(dataset, model.norm_stats, cfg)
    n = len(w1)
    if n == 0:
        raise NoDataError(f"no duet is long enough for a window of {cfg.T + 1} frames")

    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(cfg.betas, cfg.adam_eps)
    report = TrainReport()
    for epoch in range(cfg.epochs):
        lr = cosine_lr(epoch, cfg)
        order = rng.permutation(n)
        steps = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            b1 = gaussian_augment(w1[idx], cfg.noise_sigma, rng)
            b2 = gaussian_augment(w2[idx], cfg.noise_sigma, rng)
            steps.append(train_step(model, (b1, b2), cfg, rng, optimizer, lr))
        report.steps.extend(steps)
        rec = EpochRecord(
            epoch=epoch,
            l_mse=float(np.mean([s.l_mse for s in steps])),
            l_velocity=float(np.mean([s.l_velocity for s in steps])),
            l_kl=float(np.mean([s.l_kl for s in steps])),
            total=float(np.mean([s.total for s in steps])),
            mode_fraction=sum(s.mode == FOCUSED for s in steps) / len(steps),
            lr=lr,
        )
        report.epochs.append(rec)
        log.info("epoch %d lr %.3g total %.5f mse %.5f vel %.5f kl %.3f focused %.2f",
                 epoch, lr, rec.total, rec.l_mse, rec.l_velocity, rec.l_kl, rec.mode_fraction)
        if on_epoch is not None:
            on_epoch(rec)
        if checkpoint_path is not None and checkpoint_every_epoch:
            save_checkpoint(model, checkpoint_path)
    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path)
    return report
