"""Smoothing, normalization, augmentation and windowing of joint sequences."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct, idct

from .errors import DimensionError, NoDataError

STD_FLOOR = 1e-6


@dataclass
class JointSequence:
    """One dancer's motion: ``data`` is (T, M, D)."""

    data: np.ndarray
    fps: float = 30.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise DimensionError(f"joint sequence must be (T, M, D), got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("joint sequence contains non-finite values")

    def __len__(self):
        return len(self.data)

    @property
    def shape(self):
        return self.data.shape

    def with_data(self, data):
        return JointSequence(data, self.fps)


@dataclass
class NormStats:
    mean: np.ndarray  # (M, D)
    std: np.ndarray  # (M, D), strictly positive

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape:
            raise DimensionError("mean and std shapes differ")
        if np.any(self.std < STD_FLOOR):
            raise ValueError("std entries must be >= the floor")


def _data(seq):
    return seq.data if isinstance(seq, JointSequence) else np.asarray(seq, dtype=np.float64)


def _wrap(like, data):
    return like.with_data(data) if isinstance(like, JointSequence) else data


def dct_lowpass(seq, keep_fraction=0.25):
    """Zero every orthonormal DCT-II coefficient with index >= ceil(keep_fraction * T).

    Each scalar channel is filtered independently along time.
    """
    if not (0.0 < keep_fraction <= 1.0):
        raise ValueError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    x = _data(seq)
    T = x.shape[0]
    if T < 2:
        raise ValueError("DCT smoothing needs at least two frames")
    # tolerate float error in keep_fraction * T landing just above an integer
    keep = min(T, math.ceil(keep_fraction * T - 1e-9))
    coeffs = dct(x, type=2, norm="ortho", axis=0)
    coeffs[keep:] = 0.0
    return _wrap(seq, idct(coeffs, type=2, norm="ortho", axis=0))


def compute_norm_stats(train_seqs):
    """Per-channel mean and population std pooled over every frame given."""
    arrays = [_data(s) for s in train_seqs]
    if not arrays:
        raise NoDataError("cannot compute normalization statistics from an empty list")
    pooled = np.concatenate(arrays, axis=0)
    mean = pooled.mean(axis=0)
    std = pooled.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return NormStats(mean, std)


def normalize(seq, stats: NormStats, inverse=False):
    x = _data(seq)
    if x.shape[-2:] != stats.mean.shape:
        raise DimensionError(f"sequence channels {x.shape[-2:]} do not match stats {stats.mean.shape}")
    if inverse:
        return _wrap(seq, x * stats.std + stats.mean)
    return _wrap(seq, (x - stats.mean) / stats.std)


def proximity_signal(a, b):
    """Elementwise absolute difference between two dancers."""
    xa, xb = _data(a), _data(b)
    if xa.shape != xb.shape:
        raise DimensionError(f"proximity needs equal shapes, got {xa.shape} and {xb.shape}")
    return _wrap(a, np.abs(xa - xb))


def gaussian_augment(seq, sigma, rng):
    if sigma < 0:
        raise ValueError(f"noise sigma must be non-negative, got {sigma}")
    x = _data(seq)
    if sigma == 0:
        return _wrap(seq, x.copy())
    return _wrap(seq, x + rng.normal(0.0, sigma, size=x.shape))


def sliding_windows(x, length, stride):
    """Stack every full window of ``length`` frames taken every ``stride`` frames."""
    x = _data(x)
    if length < 1 or stride < 1:
        raise ValueError("window length and stride must be positive")
    starts = range(0, len(x) - length + 1, stride)
    if not len(starts):
        return np.empty((0, length) + x.shape[1:])
    return np.stack([x[s:s + length] for s in starts])


def teacher_forcing_pair(window):
    """Split a (…, T+1, M, D) window into the input X and next-step target Y."""
    window = np.asarray(window)
    return window[..., :-1, :, :], window[..., 1:, :, :]
