"""Horizon MSE: how prediction error accumulates over a generated rollout.

For each sampled test window the target dancer is generated from a short
context, and the MSE against the real motion is measured over the first
``h`` generated frames for each horizon ``h``.  Errors are computed in raw
(denormalized) coordinates and averaged over windows.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import NoDataError
from .inference import DEFAULT_CONTEXT, generate_partner
from .preprocess import JointSequence, sliding_windows
from .seqio import atomic_write_text

DEFAULT_HORIZONS = (16, 32, 48, 64)
# reference values reported for the original 41-minute duet recordings
PAPER_REFERENCE = {16: 0.0126, 32: 0.0197, 48: 0.0219, 64: 0.0263}


@dataclass(frozen=True)
class HorizonRow:
    horizon: int
    mse: float


def _arr(x):
    return x.data if isinstance(x, JointSequence) else np.asarray(x, dtype=np.float64)


def horizon_mse(model, test_set, horizons=DEFAULT_HORIZONS, n_sequences=10, rng=0, context=DEFAULT_CONTEXT,
                target_dancer=2, stride=32, generate=generate_partner):
    """Average rollout MSE at each horizon over ``n_sequences`` random windows.

    ``test_set`` is a list of raw-coordinate duets ``(dancer1, dancer2)``.
    Windows span ``context + max(horizons)`` frames.  ``generate`` has the
    signature of ``generate_partner`` and can be swapped for a stub.
    """
    horizons = sorted(int(h) for h in horizons)
    if not horizons or horizons[0] < 1:
        raise ValueError("horizons must be positive integers")
    test_set = list(test_set)
    if not test_set:
        raise NoDataError("empty test set")
    length = context + horizons[-1]
    lead_idx = 2 - target_dancer  # dancer 1 leads when generating dancer 2
    leaders, truths = [], []
    for pair in test_set:
        a, b = _arr(pair[0]), _arr(pair[1])
        leaders.append(sliding_windows((a, b)[lead_idx], length, stride))
        truths.append(sliding_windows((a, b)[1 - lead_idx], length, stride))
    leaders = np.concatenate(leaders)
    truths = np.concatenate(truths)
    if len(leaders) == 0:
        raise NoDataError(f"no test duet spans the {length} frames needed")
    if n_sequences > len(leaders):
        raise ValueError(f"asked for {n_sequences} sequences but only {len(leaders)} windows exist")

    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    picks = rng.choice(len(leaders), size=n_sequences, replace=False)
    seeds = rng.integers(0, 2**63 - 1, size=n_sequences)
    sums = np.zeros(len(horizons))
    for k, (i, seed) in enumerate(zip(picks, seeds)):
        truth = truths[i]
        gen = generate(model, leaders[i], truth[:context], target_dancer=target_dancer,
                       rng=np.random.default_rng(int(seed)))
        for j, h in enumerate(horizons):
            diff = gen[context:context + h] - truth[context:context + h]
            sums[j] += np.mean(diff * diff)
    return [HorizonRow(h, float(s / n_sequences)) for h, s in zip(horizons, sums)]


def report_csv(table) -> str:
    rows = sorted(table, key=lambda r: r.horizon)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["horizon", "mse", "paper_reference"])
    for r in rows:
        ref = PAPER_REFERENCE.get(r.horizon)
        w.writerow([r.horizon, repr(float(r.mse)), "" if ref is None else repr(ref)])
    return buf.getvalue()


def emit_report(table, destination):
    """Write ``horizon,mse,paper_reference`` rows sorted by horizon."""
    table = list(table)
    if not table:
        raise ValueError("cannot write an empty report")
    atomic_write_text(destination, report_csv(table))


def read_report(path):
    with open(path, newline="") as fh:
        return [HorizonRow(int(r["horizon"]), float(r["mse"])) for r in csv.DictReader(fh)]
