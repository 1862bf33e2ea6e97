"""Checkpoint files: config, normalization statistics and every parameter.

The file is JSON.  Floats are serialized with their shortest round-trip
repr, so loading reproduces every parameter bit for bit, and saving the same
model twice yields identical bytes.
"""
from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .errors import DimensionError, ParseError
from .model import DuetModel, ModelConfig
from .preprocess import NormStats
from .seqio import atomic_write_text

FORMAT = "duetvae-checkpoint"
VERSION = 1


def dumps_checkpoint(model: DuetModel, meta=None) -> str:
    stats = None
    if model.norm_stats is not None:
        stats = {
            "shape": list(model.norm_stats.mean.shape),
            "mean": model.norm_stats.mean.reshape(-1).tolist(),
            "std": model.norm_stats.std.reshape(-1).tolist(),
        }
    params = {
        name: {"shape": list(p.data.shape), "values": p.data.reshape(-1).tolist()}
        for name, p in model.named_parameters()
    }
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "config": asdict(model.config),
        "norm_stats": stats,
        "meta": meta or {},
        "params": params,
    }
    return json.dumps(doc)


def loads_checkpoint(text) -> DuetModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"checkpoint is not valid JSON ({exc.msg})") from None
    if doc.get("format") != FORMAT:
        raise ParseError(f"not a {FORMAT} file", field="format")
    if "version" not in doc:
        raise ParseError("missing", field="version")
    if doc["version"] != VERSION:
        raise ParseError(f"unsupported checkpoint version {doc['version']}", field="version")

    model = DuetModel(ModelConfig(**doc["config"]))
    stats = doc.get("norm_stats")
    if stats is not None:
        shape = tuple(stats["shape"])
        model.norm_stats = NormStats(
            np.asarray(stats["mean"], dtype=np.float64).reshape(shape),
            np.asarray(stats["std"], dtype=np.float64).reshape(shape),
        )
    stored = doc["params"]
    expected = dict(model.named_parameters())
    if set(stored) != set(expected):
        missing = sorted(set(expected) - set(stored))
        extra = sorted(set(stored) - set(expected))
        raise ParseError(f"parameter names do not match the config (missing {missing[:3]}, unexpected {extra[:3]})",
                         field="params")
    for name, p in expected.items():
        entry = stored[name]
        shape = tuple(entry["shape"])
        if shape != p.data.shape:
            raise DimensionError(f"parameter {name}: stored shape {shape}, model expects {p.data.shape}")
        p.values = np.asarray(entry["values"], dtype=np.float64).reshape(shape)
        p.zero_grad()
    return model


def save_checkpoint(model: DuetModel, path, meta=None):
    atomic_write_text(path, dumps_checkpoint(model, meta))


def load_checkpoint(path) -> DuetModel:
    with open(path) as fh:
        return loads_checkpoint(fh.read())


def read_checkpoint_meta(path) -> dict:
    with open(path) as fh:
        return json.load(fh).get("meta", {})
