"""Reading pose-estimator detections and repairing them into a clean duet.

Input is line-delimited JSON, one object per frame::

    {"frame": 12, "people": [{"score": 0.93, "joints": [x0, y0, z0, x1, ...]}, ...]}

``joints`` holds ``N_JOINTS * 3`` numbers, coordinates interleaved per joint.
An optional integer ``person_id`` per person is carried through untouched.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NoDataError, ParseError, UnrecoverableStartError

N_JOINTS = 29
N_DIMS = 3
ROOT_JOINT = 0


@dataclass(frozen=True)
class DetectionRecord:
    person_id: int
    score: float
    joints: np.ndarray  # (M, D)


@dataclass(frozen=True)
class FrameDetections:
    frame_index: int
    detections: tuple = ()

    def __len__(self):
        return len(self.detections)


@dataclass
class RawDuetSequence:
    """Two dancers with exactly one pose each per frame, stored as (T, M, D) arrays."""

    dancer1: np.ndarray
    dancer2: np.ndarray
    fps: float = 30.0

    def __post_init__(self):
        self.dancer1 = np.asarray(self.dancer1, dtype=np.float64)
        self.dancer2 = np.asarray(self.dancer2, dtype=np.float64)
        if self.dancer1.shape != self.dancer2.shape or self.dancer1.ndim != 3:
            raise DimensionError(
                f"dancer arrays must share a (T, M, D) shape, got {self.dancer1.shape} and {self.dancer2.shape}"
            )
        if len(self.dancer1) < 1:
            raise NoDataError("a duet sequence needs at least one frame")

    def __len__(self):
        return len(self.dancer1)

    @property
    def frames(self):
        return list(zip(self.dancer1, self.dancer2))

    @classmethod
    def from_pairs(cls, pairs, fps=30.0):
        pairs = list(pairs)
        if not pairs:
            raise NoDataError("a duet sequence needs at least one frame")
        return cls(np.stack([a for a, _ in pairs]), np.stack([b for _, b in pairs]), fps)


@dataclass
class RepairStats:
    frames: int = 0
    frames_imputed: int = 0
    ghosts_culled: int = 0
    singles_replicated: int = 0
    swaps_fixed: int = 0


# -- parsing -------------------------------------------------------------------

def _lines(stream):
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    for line in stream:
        if isinstance(line, (bytes, bytearray)):
            line = line.decode("utf-8")
        yield line


def _parse_person(obj, frame, n_joints):
    if not isinstance(obj, dict):
        raise ParseError("person entry must be an object", frame, "people")
    if "score" not in obj:
        raise ParseError("missing", frame, "score")
    score = obj["score"]
    if isinstance(score, bool) or not isinstance(score, (int, float)) or not math.isfinite(score):
        raise ParseError(f"score must be a finite number, got {score!r}", frame, "score")
    if "joints" not in obj:
        raise ParseError("missing", frame, "joints")
    raw = obj["joints"]
    if not isinstance(raw, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw
    ):
        raise ParseError("joints must be a flat list of numbers", frame, "joints")
    if len(raw) != n_joints * N_DIMS:
        raise DimensionError(
            f"frame {frame}: expected {n_joints * N_DIMS} joint values (M={n_joints} x D={N_DIMS}), got {len(raw)}"
        )
    joints = np.asarray(raw, dtype=np.float64).reshape(n_joints, N_DIMS)
    if not np.all(np.isfinite(joints)):
        raise ParseError("non-finite coordinate", frame, "joints")
    pid = obj.get("person_id", -1)
    if isinstance(pid, bool) or not isinstance(pid, int):
        raise ParseError("person_id must be an integer", frame, "person_id")
    return DetectionRecord(person_id=pid, score=float(score), joints=joints)


def parse_detections(stream, n_joints=N_JOINTS):
    """Parse a detection file (bytes, str or file object) into frames.

    Detections within each frame come back sorted by descending score.
    """
    frames = []
    last = -1
    for lineno, line in enumerate(_lines(stream), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno} is not valid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise ParseError(f"line {lineno} is not an object")
        idx = obj.get("frame")
        if isinstance(idx, bool) or not isinstance(idx, int) or idx < 0:
            raise ParseError(f"line {lineno}: must be a non-negative integer, got {idx!r}", field="frame")
        if idx <= last:
            raise ParseError(f"frame indices must strictly increase (previous {last})", idx, "frame")
        people = obj.get("people")
        if not isinstance(people, list):
            raise ParseError("must be a list", idx, "people")
        records = [_parse_person(p, idx, n_joints) for p in people]
        records.sort(key=lambda r: -r.score)
        frames.append(FrameDetections(idx, tuple(records)))
        last = idx
    return frames


def format_detections(frames) -> str:
    """Inverse of ``parse_detections`` (floats written with round-trip precision)."""
    out = []
    for fr in frames:
        people = [
            {"person_id": d.person_id, "score": d.score, "joints": np.asarray(d.joints).reshape(-1).tolist()}
            for d in fr.detections
        ]
        out.append(json.dumps({"frame": fr.frame_index, "people": people}))
    return "\n".join(out) + "\n"


# -- repairs -------------------------------------------------------------------

def _root_dist(a, b):
    return float(np.linalg.norm(a[ROOT_JOINT] - b[ROOT_JOINT]))


def impute_missing(frames):
    """Fill frames with no detections from the nearest earlier non-empty frame.

    Empty frames before the first detection are filled from the first
    non-empty frame.  Frame indices are preserved.
    """
    first = next((f for f in frames if f.detections), None)
    if first is None:
        raise NoDataError("no frame contains any detection")
    out = []
    source = first.detections
    for f in frames:
        if f.detections:
            source = f.detections
            out.append(f)
        else:
            out.append(FrameDetections(f.frame_index, source))
    return out


def select_top_two(frame, previous=None):
    """Reduce one frame to exactly two poses.

    With two or more detections the two best-scored are kept.  With one, the
    detection takes the slot of the nearer previous person and the farther
    previous person is replicated into the other slot.  With none, the
    previous pair is copied.
    """
    dets = sorted(frame.detections, key=lambda r: -r.score)
    if len(dets) >= 2:
        return dets[0].joints, dets[1].joints
    if previous is None:
        raise UnrecoverableStartError(
            f"frame {frame.frame_index} has {len(dets)} detection(s) and there is no previous frame"
        )
    p1, p2 = previous
    if not dets:
        return p1, p2
    det = dets[0].joints
    # farther previous person is replicated; ties replicate the second
    if _root_dist(det, p1) <= _root_dist(det, p2):
        return det, p2
    return p1, det


def _assignment_swaps(dancer1, dancer2):
    """Per-frame flags: True where the incoming order must be exchanged."""
    T = len(dancer1)
    swap = np.zeros(T, dtype=bool)
    prev_a, prev_b = dancer1[0], dancer2[0]
    for t in range(1, T):
        a, b = dancer1[t], dancer2[t]
        if _root_dist(a, prev_b) < _root_dist(a, prev_a):
            swap[t] = True
            a, b = b, a
        prev_a, prev_b = a, b
    return swap


def resolve_identities(seq: RawDuetSequence, return_swaps=False):
    """Reorder each frame's pair so dancers keep their identity over time.

    Frame 0 fixes the identities.  In every later frame the first pose stays
    first unless its root joint is strictly closer to the previous frame's
    second dancer.  Coordinates are never modified.
    """
    swap = _assignment_swaps(seq.dancer1, seq.dancer2)
    d1 = np.where(swap[:, None, None], seq.dancer2, seq.dancer1)
    d2 = np.where(swap[:, None, None], seq.dancer1, seq.dancer2)
    out = RawDuetSequence(d1, d2, seq.fps)
    if return_swaps:
        return out, swap
    return out


def repair(frames, fps=30.0):
    """Full detection repair: impute, cull to two, then fix identity swaps.

    Returns the cleaned ``RawDuetSequence`` and a ``RepairStats``.
    """
    stats = RepairStats(frames=len(frames))
    stats.frames_imputed = sum(1 for f in frames if not f.detections)
    stats.ghosts_culled = sum(max(0, len(f.detections) - 2) for f in frames)
    filled = impute_missing(frames)
    pairs = []
    previous = None
    for f in filled:
        if len(f.detections) == 1:
            stats.singles_replicated += 1
        previous = select_top_two(f, previous)
        pairs.append(previous)
    seq = RawDuetSequence.from_pairs(pairs, fps)
    seq, swap = resolve_identities(seq, return_swaps=True)
    # an identity switch is a change in the applied permutation between frames
    stats.swaps_fixed = int(np.count_nonzero(swap[1:] != swap[:-1]) + swap[0])
    return seq, stats
