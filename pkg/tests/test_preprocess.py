import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from duetvae.errors import DimensionError, NoDataError
from duetvae.preprocess import (
    JointSequence,
    NormStats,
    compute_norm_stats,
    dct_lowpass,
    gaussian_augment,
    normalize,
    proximity_signal,
    sliding_windows,
    teacher_forcing_pair,
)


def dct_matrix(T):
    """Orthonormal DCT-II basis written out from its definition."""
    C = np.empty((T, T))
    for k in range(T):
        scale = math.sqrt(1.0 / T) if k == 0 else math.sqrt(2.0 / T)
        for n in range(T):
            C[k, n] = scale * math.cos(math.pi * (n + 0.5) * k / T)
    return C


def lowpass_oracle(x, keep_fraction):
    T = len(x)
    C = dct_matrix(T)
    keep = math.ceil(round(keep_fraction * T, 9))
    flat = x.reshape(T, -1)
    coeffs = C @ flat
    coeffs[keep:] = 0.0
    return (C.T @ coeffs).reshape(x.shape)


finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


# -- DCT -----------------------------------------------------------------------

def test_dct_constant_channel():
    x = np.full((20, 2, 3), 4.2)
    for kf in (0.05, 0.25, 1.0):
        np.testing.assert_allclose(dct_lowpass(x, kf), x, atol=1e-9)


def test_dct_full_keep_round_trip():
    x = np.random.default_rng(0).normal(size=(64, 29, 3))
    assert np.max(np.abs(dct_lowpass(x, 1.0) - x)) < 1e-9


def test_dct_alternating_channel_mostly_removed():
    # (+1, -1, ...) is not a DCT-II basis vector: the definition-sum oracle
    # leaves 0.41% of its energy in the lowest 16 coefficients, peaking at 0.25
    x = np.tile([1.0, -1.0], 32).reshape(64, 1, 1)
    coeffs = dct_matrix(64) @ x[:, 0, 0]
    kept = np.sum(coeffs[:16] ** 2) / np.sum(coeffs ** 2)
    assert kept == pytest.approx(0.0041192898940852, rel=1e-9)
    y = dct_lowpass(x, 0.25)
    np.testing.assert_allclose(y, lowpass_oracle(x, 0.25), atol=1e-12)
    assert np.max(np.abs(y)) == pytest.approx(0.25, abs=1e-12)
    assert np.sum(y * y) / np.sum(x * x) == pytest.approx(kept, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.sampled_from([0.1, 0.25, 0.5, 0.8, 1.0]), st.integers(0, 2**31))
def test_dct_matches_definition(T, kf, seed):
    x = np.random.default_rng(seed).normal(size=(T, 2, 3))
    np.testing.assert_allclose(dct_lowpass(x, kf), lowpass_oracle(x, kf), atol=1e-9)


def test_dct_keep_count():
    # 0.25 * 10 = 2.5 -> three coefficients survive
    x = np.zeros((10, 1, 1))
    x[:, 0, 0] = dct_matrix(10)[3]
    assert np.max(np.abs(dct_lowpass(x, 0.25))) < 1e-12
    x[:, 0, 0] = dct_matrix(10)[2]
    np.testing.assert_allclose(dct_lowpass(x, 0.25), x, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 50), st.integers(1, 3), st.integers(1, 3)), elements=finite),
       st.floats(0.01, 1.0))
def test_dct_projection_and_energy(x, kf):
    once = dct_lowpass(x, kf)
    assert np.max(np.abs(dct_lowpass(once, kf) - once), initial=0) < 1e-9
    e_in = np.sum(x * x, axis=0)
    e_out = np.sum(once * once, axis=0)
    assert np.all(e_out <= e_in + 1e-9 * (1 + e_in))


def test_dct_errors_and_wrapping():
    with pytest.raises(ValueError):
        dct_lowpass(np.zeros((8, 1, 1)), 0.0)
    with pytest.raises(ValueError):
        dct_lowpass(np.zeros((8, 1, 1)), 1.5)
    with pytest.raises(ValueError):
        dct_lowpass(np.zeros((1, 1, 1)), 0.5)
    seq = JointSequence(np.ones((4, 2, 3)), fps=25.0)
    out = dct_lowpass(seq)
    assert isinstance(out, JointSequence) and out.fps == 25.0


# -- normalization -------------------------------------------------------------

def test_self_normalization():
    x = np.random.default_rng(1).normal(3.0, 2.0, size=(200, 4, 3))
    y = normalize(x, compute_norm_stats([x]))
    assert np.max(np.abs(y.mean(axis=0))) < 1e-9
    np.testing.assert_allclose(y.var(axis=0), 1.0, atol=1e-6)


@given(arrays(np.float64, (6, 2, 3), elements=finite), st.integers(0, 2**31))
def test_normalize_round_trip(x, seed):
    rng = np.random.default_rng(seed)
    stats = NormStats(rng.normal(size=(2, 3)), rng.uniform(0.1, 5.0, size=(2, 3)))
    back = normalize(normalize(x, stats), stats, inverse=True)
    np.testing.assert_allclose(back, x, rtol=1e-12, atol=1e-12)


def test_constant_channel_floor():
    x = np.random.default_rng(2).normal(size=(10, 2, 3))
    x[:, 1, 2] = 5.0
    stats = compute_norm_stats([x])
    assert stats.std[1, 2] == 1.0 and stats.mean[1, 2] == 5.0
    assert np.all(normalize(x, stats)[:, 1, 2] == 0.0)


def test_norm_stats_hand_values():
    x = np.array([1.0, 3.0]).reshape(2, 1, 1)
    stats = compute_norm_stats([x])
    assert stats.mean[0, 0] == 2.0 and stats.std[0, 0] == 1.0
    zero = compute_norm_stats([np.zeros((5, 2, 3))])
    assert np.all(zero.mean == 0) and np.all(zero.std == 1)


def test_norm_stats_pooling():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(7, 2, 3)), rng.normal(size=(11, 2, 3))
    s1 = compute_norm_stats([a, JointSequence(b)])
    s2 = compute_norm_stats([np.concatenate([a, b])])
    assert np.array_equal(s1.mean, s2.mean) and np.array_equal(s1.std, s2.std)


def test_norm_errors():
    with pytest.raises(NoDataError):
        compute_norm_stats([])
    with pytest.raises(DimensionError):
        normalize(np.zeros((3, 2, 3)), NormStats(np.zeros((4, 3)), np.ones((4, 3))))
    with pytest.raises(ValueError):
        NormStats(np.zeros(2), np.zeros(2))


# -- proximity, augmentation, windows ------------------------------------------

def test_proximity_examples():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(5, 2, 3))
    assert np.all(proximity_signal(a, a) == 0)
    np.testing.assert_allclose(proximity_signal(a + 1, a), 1.0, atol=1e-12)
    with pytest.raises(DimensionError):
        proximity_signal(a, a[:4])


@given(arrays(np.float64, (4, 2, 3), elements=finite), arrays(np.float64, (4, 2, 3), elements=finite))
def test_proximity_symmetric_nonnegative(a, b):
    p = proximity_signal(a, b)
    assert np.array_equal(p, proximity_signal(b, a))
    assert np.all(p >= 0)


def test_augment():
    x = np.random.default_rng(5).normal(size=(3, 2, 3))
    assert np.array_equal(gaussian_augment(x, 0.0, np.random.default_rng(0)), x)
    a = gaussian_augment(x, 0.3, np.random.default_rng(9))
    b = gaussian_augment(x, 0.3, np.random.default_rng(9))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        gaussian_augment(x, -0.1, np.random.default_rng(0))


def test_augment_noise_scale():
    x = np.zeros((100_000, 1, 1))
    noise = gaussian_augment(x, 0.01, np.random.default_rng(6))
    assert abs(noise.std() - 0.01) < 0.02 * 0.01


def test_windows_and_shift():
    x = np.arange(10.0).reshape(10, 1, 1)
    w = sliding_windows(x, 4, 3)
    assert w.shape == (3, 4, 1, 1)
    np.testing.assert_array_equal(w[:, 0, 0, 0], [0, 3, 6])
    X, Y = teacher_forcing_pair(w)
    assert X.shape == Y.shape == (3, 3, 1, 1)
    np.testing.assert_array_equal(Y[:, :, 0, 0], X[:, :, 0, 0] + 1)
    assert sliding_windows(x, 11, 1).shape == (0, 11, 1, 1)


def test_joint_sequence_validation():
    with pytest.raises(DimensionError):
        JointSequence(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        JointSequence(np.full((3, 2, 3), np.nan))
