"""File formats for cleaned duets and animation export.

A cleaned duet file is JSON::

    {"fps": 30.0, "shape": [T, M, D], "dancer1": [...], "dancer2": [...]}

with both dancers flattened row-major.  Floats are written with Python's
shortest round-trip repr, so save and load are bit-exact.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile

import numpy as np

from .errors import DimensionError, ParseError
from .ingest import RawDuetSequence


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_sequence(seq: RawDuetSequence) -> str:
    return json.dumps(
        {
            "fps": float(seq.fps),
            "shape": list(seq.dancer1.shape),
            "dancer1": seq.dancer1.reshape(-1).tolist(),
            "dancer2": seq.dancer2.reshape(-1).tolist(),
        }
    )


def loads_sequence(text) -> RawDuetSequence:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not a cleaned sequence file ({exc.msg})") from None
    for key in ("fps", "shape", "dancer1", "dancer2"):
        if key not in obj:
            raise ParseError("missing", field=key)
    shape = tuple(int(n) for n in obj["shape"])
    if len(shape) != 3:
        raise DimensionError(f"shape must be [T, M, D], got {obj['shape']}")
    n = int(np.prod(shape))
    arrays = []
    for key in ("dancer1", "dancer2"):
        flat = np.asarray(obj[key], dtype=np.float64)
        if flat.size != n:
            raise DimensionError(f"{key} has {flat.size} values, shape {list(shape)} needs {n}")
        arrays.append(flat.reshape(shape))
    return RawDuetSequence(arrays[0], arrays[1], float(obj["fps"]))


def save_sequence(seq: RawDuetSequence, path):
    atomic_write_text(path, dumps_sequence(seq))


def load_sequence(path) -> RawDuetSequence:
    with open(path) as fh:
        return loads_sequence(fh.read())


def animation_rows(dancer1, dancer2):
    for t in range(len(dancer1)):
        for dancer, arr in ((1, dancer1), (2, dancer2)):
            for j, (x, y, z) in enumerate(arr[t]):
                yield t, dancer, j, x, y, z


def save_animation_csv(dancer1, dancer2, path):
    """Long-format CSV ``frame,dancer,joint,x,y,z`` for external viewers."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", "dancer", "joint", "x", "y", "z"])
    for t, d, j, x, y, z in animation_rows(np.asarray(dancer1), np.asarray(dancer2)):
        w.writerow([t, d, j, repr(float(x)), repr(float(y)), repr(float(z))])
    atomic_write_text(path, buf.getvalue())
