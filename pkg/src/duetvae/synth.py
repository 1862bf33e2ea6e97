"""Procedural duets and detection-level corruption fixtures.

Motion is built from sums of low-frequency sinusoids (at most 10% of the
Nyquist rate), so DCT smoothing at a 25% cutoff leaves it nearly intact.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ingest import DetectionRecord, FrameDetections, RawDuetSequence, RepairStats
from .preprocess import JointSequence

STYLES = ("mirror", "orbit", "lead-follow")
MAX_FREQ = 0.05  # cycles per frame
N_COMPONENTS = 3


def _skeleton(rng, joints):
    offsets = rng.normal(0.0, 0.25, size=(joints, 3))
    offsets[0] = 0.0
    return offsets


def _wobble(rng, joints, times, amplitude):
    """Per-joint smooth displacement, shape (len(times), joints, 3)."""
    freq = rng.uniform(0.1 * MAX_FREQ, MAX_FREQ, size=(N_COMPONENTS, joints, 3))
    phase = rng.uniform(0.0, 2 * np.pi, size=(N_COMPONENTS, joints, 3))
    amp = rng.uniform(0.2, 1.0, size=(N_COMPONENTS, joints, 3)) * amplitude / N_COMPONENTS
    t = times[:, None, None, None]
    return np.sum(amp * np.sin(2 * np.pi * freq * t + phase), axis=1)


def _body(rng, joints, times, root, amplitude=0.15):
    return root[:, None, :] + _skeleton(rng, joints)[None] + _wobble(rng, joints, times, amplitude)


def reflect_x(x):
    """Mirror poses across the x = 0 plane."""
    out = np.array(x, dtype=np.float64, copy=True)
    out[..., 0] = -out[..., 0]
    return out


def synth_duet(length, joints=29, seed=0, style="mirror", fps=30.0, lag=4, delay=6, noise=0.005):
    """Generate a smooth coupled duet as a pair of ``JointSequence``.

    ``mirror``: dancer 2 is dancer 1 reflected across x = 0, ``lag`` frames late.
    ``orbit``: the dancers circle a shared center on opposite sides.
    ``lead-follow``: dancer 2 repeats dancer 1 ``delay`` frames later plus
    Gaussian noise of std ``noise``.
    """
    if style not in STYLES:
        raise ValueError(f"unknown style {style!r}; choose from {', '.join(STYLES)}")
    if length < 2 or joints < 1:
        raise ValueError("need length >= 2 and joints >= 1")
    rng = np.random.default_rng(seed)

    if style == "mirror":
        times = np.arange(-lag, length, dtype=np.float64)
        sway = 0.3 * np.sin(2 * np.pi * rng.uniform(0.005, MAX_FREQ) * times + rng.uniform(0, 2 * np.pi))
        root = np.stack([-1.0 + 0.2 * sway, 0.9 + 0.05 * sway, sway], axis=-1)
        base = _body(rng, joints, times, root)
        d1 = base[lag:]
        d2 = reflect_x(base[:length])
    elif style == "orbit":
        times = np.arange(length, dtype=np.float64)
        theta = 2 * np.pi * rng.uniform(0.005, 0.02) * times + rng.uniform(0, 2 * np.pi)
        ring = np.stack([np.cos(theta), np.zeros_like(theta), np.sin(theta)], axis=-1)
        lift = np.array([0.0, 0.9, 0.0])
        d1 = _body(rng, joints, times, lift + ring)
        d2 = _body(rng, joints, times, lift - ring)
    else:
        times = np.arange(-delay, length, dtype=np.float64)
        drift = 0.4 * np.sin(2 * np.pi * rng.uniform(0.005, MAX_FREQ) * times[:, None] + rng.uniform(0, 2 * np.pi, 3))
        root = drift + np.array([0.0, 0.9, 0.0])
        base = _body(rng, joints, times, root)
        d1 = base[delay:]
        d2 = base[:length] + rng.normal(0.0, noise, size=(length, joints, 3))
    return JointSequence(d1, fps), JointSequence(d2, fps)


@dataclass
class CorruptionSpec:
    swaps: tuple = ()  # identity switch starts at these frames (toggles from there on)
    drops: tuple = ()  # frames with no detections
    ghosts: tuple = ()  # frames that gain a spurious low-score detection
    jitter: float = 0.0
    ghost_score: float = 0.05


@dataclass
class CorruptedDuet:
    frames: list
    truth: RawDuetSequence  # what a correct repair must return
    expected: RepairStats = field(default_factory=RepairStats)


def corrupt(pair, spec: CorruptionSpec, seed=0):
    """Render a clean duet as detections and inject tracking failures.

    Dancer 1 always scores higher than dancer 2, so score sorting alone
    never reorders them; a swap exchanges which pose sits in which record
    from that frame on.  ``truth`` holds the jittered clean duet with each
    dropped frame replaced by the frame a forward fill would use.
    """
    a, b = pair
    d1 = np.array(a.data if isinstance(a, JointSequence) else a, dtype=np.float64)
    d2 = np.array(b.data if isinstance(b, JointSequence) else b, dtype=np.float64)
    fps = a.fps if isinstance(a, JointSequence) else 30.0
    T = len(d1)
    for name, frames, lo in (("swap", spec.swaps, 1), ("drop", spec.drops, 0), ("ghost", spec.ghosts, 0)):
        for f in frames:
            if not lo <= f < T:
                raise ValueError(f"{name} frame {f} outside [{lo}, {T})")
    if len(set(spec.drops)) == T:
        raise ValueError("cannot drop every frame")

    rng = np.random.default_rng(seed)
    if spec.jitter > 0:
        d1 = d1 + rng.normal(0.0, spec.jitter, size=d1.shape)
        d2 = d2 + rng.normal(0.0, spec.jitter, size=d2.shape)

    drops = set(spec.drops)
    swapped = np.zeros(T, dtype=bool)
    for f in spec.swaps:
        swapped[f:] ^= True
    ghost_frames = set(spec.ghosts)

    frames = []
    for t in range(T):
        if t in drops:
            frames.append(FrameDetections(t, ()))
            continue
        s1 = rng.uniform(0.85, 0.99)
        s2 = rng.uniform(0.5, 0.8)
        first, second = (d2[t], d1[t]) if swapped[t] else (d1[t], d2[t])
        people = [DetectionRecord(0, s1, first), DetectionRecord(1, s2, second)]
        if t in ghost_frames:
            ghost = rng.normal(0.0, 1.0, size=d1[t].shape) + rng.uniform(-3, 3, size=3)
            people.append(DetectionRecord(2, spec.ghost_score, ghost))
        frames.append(FrameDetections(t, tuple(sorted(people, key=lambda r: -r.score))))

    keep = [t for t in range(T) if t not in drops]
    source = np.array([max([k for k in keep if k <= t], default=keep[0]) for t in range(T)])
    truth = RawDuetSequence(d1[source], d2[source], fps)

    # a switch is only observable where the applied permutation changes
    observed = swapped[source]
    expected = RepairStats(
        frames=T,
        frames_imputed=len(drops),
        ghosts_culled=len(ghost_frames - drops),
        swaps_fixed=int(np.count_nonzero(observed[1:] != observed[:-1])),
    )
    return CorruptedDuet(frames, truth, expected)
