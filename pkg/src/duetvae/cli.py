"""Command-line entry point: ``duetvae {preprocess,synth,train,generate,evaluate}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint
from .errors import DuetError
from .evaluation import DEFAULT_HORIZONS, emit_report, horizon_mse
from .inference import DEFAULT_CONTEXT, generate_duet, generate_partner
from .ingest import RawDuetSequence, format_detections, parse_detections, repair
from .model import DuetModel, ModelConfig
from .preprocess import dct_lowpass
from .seqio import atomic_write_text, load_sequence, save_animation_csv, save_sequence
from .synth import STYLES, CorruptionSpec, corrupt, synth_duet
from .training import TrainConfig, train

log = logging.getLogger("duetvae")


class _Outputs:
    """Files a command has finished writing; removed again if it later fails.

    Every write goes through a temporary file, so an interrupted write never
    leaves a partial file behind.
    """

    def __init__(self):
        self.paths = []

    def wrote(self, path):
        self.paths.append(path)

    def cleanup(self):
        for p in self.paths:
            if os.path.exists(p):
                os.unlink(p)


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()] if text else []


# -- preprocess ----------------------------------------------------------------

def cmd_preprocess(args, outputs):
    inputs = args.inputs
    if len(inputs) > 1:
        os.makedirs(args.out, exist_ok=True)
    for path in inputs:
        with open(path, "rb") as fh:
            frames = parse_detections(fh, n_joints=args.joints)
        seq, stats = repair(frames, fps=args.fps)
        if len(seq) >= 2:
            seq = RawDuetSequence(dct_lowpass(seq.dancer1, args.dct_keep), dct_lowpass(seq.dancer2, args.dct_keep),
                                  seq.fps)
        if len(inputs) > 1:
            stem = os.path.splitext(os.path.basename(path))[0]
            out = os.path.join(args.out, stem + ".seq")
        else:
            out = args.out
        save_sequence(seq, out)
        outputs.wrote(out)
        print(f"{path}: frames={stats.frames} imputed={stats.frames_imputed} swaps_fixed={stats.swaps_fixed} "
              f"ghosts_culled={stats.ghosts_culled} singles_replicated={stats.singles_replicated} -> {out}")


# -- synth ---------------------------------------------------------------------

def cmd_synth(args, outputs):
    a, b = synth_duet(args.length, args.joints, seed=args.seed, style=args.style, fps=args.fps)
    save_sequence(RawDuetSequence(a.data, b.data, args.fps), args.out)
    outputs.wrote(args.out)
    print(f"wrote {args.style} duet of {args.length} frames to {args.out}")
    if args.raw:
        spec = CorruptionSpec(swaps=tuple(_int_list(args.swaps)), drops=tuple(_int_list(args.drops)),
                              ghosts=tuple(_int_list(args.ghosts)), jitter=args.jitter)
        fixture = corrupt((a, b), spec, seed=args.seed)
        atomic_write_text(args.raw, format_detections(fixture.frames))
        outputs.wrote(args.raw)
        e = fixture.expected
        print(f"wrote detections to {args.raw}: imputed={e.frames_imputed} swaps={e.swaps_fixed} "
              f"ghosts={e.ghosts_culled}")


# -- train ---------------------------------------------------------------------

_TRAIN_FLAGS = {
    "epochs": "epochs", "seed": "seed", "p": "p", "lr": "lr", "alpha": "alpha", "beta": "beta",
    "eta": "eta", "frames": "frames", "window": "T", "stride": "stride", "batch_size": "batch_size",
    "noise_sigma": "noise_sigma", "t_max": "t_max", "target": "target_dancer",
}
_MODEL_FLAGS = {
    "d_model": "d_model", "heads": "n_heads", "latent_dim": "latent_dim", "ff_dim": "ff_dim",
    "lstm_layers": "lstm_layers", "conv_kernel": "conv_kernel", "decoder_layers": "decoder_layers",
}


def _load_config(path):
    if not path:
        return {}, {}
    with open(path) as fh:
        doc = json.load(fh)
    model = doc.pop("model", {})
    if "betas" in doc:
        doc["betas"] = tuple(doc["betas"])
    return doc, model


def build_configs(args, n_joints):
    train_opts, model_opts = _load_config(args.config)
    for flag, key in _TRAIN_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            train_opts[key] = value
    if isinstance(train_opts.get("target_dancer"), str) and train_opts["target_dancer"] in ("1", "2"):
        train_opts["target_dancer"] = int(train_opts["target_dancer"])
    for flag, key in _MODEL_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            model_opts[key] = value
    model_opts["n_joints"] = n_joints
    known = {f.name for f in fields(ModelConfig)}
    unknown = set(model_opts) - known
    if unknown:
        raise ValueError(f"unknown model options: {', '.join(sorted(unknown))}")
    return TrainConfig.from_dict(train_opts), ModelConfig(**model_opts)


def cmd_train(args, outputs):
    if args.synthetic:
        a, b = synth_duet(args.synthetic_length, args.joints, seed=args.synthetic_seed, style=args.synthetic_style)
        dataset = [(a.data, b.data)]
        n_joints = args.joints
    else:
        if not args.data:
            raise ValueError("give --data files or --synthetic")
        seqs = [load_sequence(p) for p in args.data]
        dataset = [(s.dancer1, s.dancer2) for s in seqs]
        n_joints = seqs[0].dancer1.shape[1]
    tcfg, mcfg = build_configs(args, n_joints)
    model = DuetModel(mcfg, seed=tcfg.seed)
    log.info("model has %d parameters", model.num_parameters())
    report = train(model, dataset, tcfg, checkpoint_path=args.checkpoint)
    outputs.wrote(args.checkpoint)
    report.write_csv(args.report)
    outputs.wrote(args.report)
    last = report.epochs[-1] if report.epochs else None
    print(f"trained {len(report.epochs)} epochs; checkpoint {args.checkpoint}; report {args.report}"
          + (f"; final total {last.total:.6f}" if last else ""))


# -- generate ------------------------------------------------------------------

def cmd_generate(args, outputs):
    if not os.path.exists(args.checkpoint):
        raise FileNotFoundError(f"checkpoint not found: {args.checkpoint}")
    model = load_checkpoint(args.checkpoint)
    rng = np.random.default_rng(args.seed)
    if args.mode == "duet":
        d1, d2 = generate_duet(model, args.length, rng=rng, context=args.context)
    else:
        if not args.leader:
            raise ValueError("--leader is required in partner mode")
        src = load_sequence(args.leader)
        T = min(args.length, len(src))
        target = args.target
        leader = (src.dancer1, src.dancer2)[2 - target][:T]
        follower = (src.dancer1, src.dancer2)[target - 1][:T]
        gen = generate_partner(model, leader, follower[:args.context], target_dancer=target, rng=rng)
        d1, d2 = (leader, gen) if target == 2 else (gen, leader)
    save_sequence(RawDuetSequence(d1, d2), args.out)
    outputs.wrote(args.out)
    if args.csv:
        save_animation_csv(d1, d2, args.csv)
        outputs.wrote(args.csv)
    print(f"generated {len(d1)} frames ({args.mode}) -> {args.out}")


# -- evaluate ------------------------------------------------------------------

def cmd_evaluate(args, outputs):
    if not os.path.exists(args.checkpoint):
        raise FileNotFoundError(f"checkpoint not found: {args.checkpoint}")
    model = load_checkpoint(args.checkpoint)
    test_set = [(s.dancer1, s.dancer2) for s in (load_sequence(p) for p in args.test)]
    table = horizon_mse(model, test_set, horizons=_int_list(args.horizons), n_sequences=args.sequences,
                        rng=args.seed, context=args.context, target_dancer=args.target, stride=args.stride)
    emit_report(table, args.out)
    outputs.wrote(args.out)
    for row in table:
        print(f"t={row.horizon:3d}  mse={row.mse:.6f}")


# -- parser --------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="duetvae", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="repair and smooth raw detection files")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="detection files (JSON lines)")
    p.add_argument("--out", required=True, help="output file, or directory when several inputs are given")
    p.add_argument("--dct-keep", type=float, default=0.25, help="fraction of DCT coefficients kept (default 0.25)")
    p.add_argument("--fps", type=float, default=30.0, help="frame rate recorded in the output (default 30)")
    p.add_argument("--joints", type=int, default=29, help="joints per person (default 29)")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("synth", help="write a synthetic duet, optionally with corrupted detections")
    p.add_argument("--out", required=True, help="cleaned sequence output")
    p.add_argument("--style", choices=STYLES, default="lead-follow")
    p.add_argument("--length", type=int, default=400)
    p.add_argument("--joints", type=int, default=29)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--raw", help="also write corrupted detections to this file")
    p.add_argument("--swaps", help="comma-separated frames where identities switch")
    p.add_argument("--drops", help="comma-separated frames with no detections")
    p.add_argument("--ghosts", help="comma-separated frames given a low-score ghost detection")
    p.add_argument("--jitter", type=float, default=0.0, help="std of Gaussian joint noise")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a duet model")
    p.add_argument("--data", nargs="*", help="cleaned sequence files")
    p.add_argument("--synthetic", action="store_true", help="train on a generated duet instead of --data")
    p.add_argument("--synthetic-style", choices=STYLES, default="lead-follow")
    p.add_argument("--synthetic-length", type=int, default=320)
    p.add_argument("--synthetic-seed", type=int, default=0)
    p.add_argument("--joints", type=int, default=29, help="joints for --synthetic (default 29)")
    p.add_argument("--config", help="JSON file of training options; flags override it")
    p.add_argument("--checkpoint", default="model.ckpt", help="checkpoint output (default model.ckpt)")
    p.add_argument("--report", default="train_report.csv", help="per-epoch CSV (default train_report.csv)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--p", type=float, help="probability of a FOCUSED (VAE-only) step")
    p.add_argument("--lr", type=float)
    p.add_argument("--alpha", type=float, help="MSE weight")
    p.add_argument("--beta", type=float, help="velocity weight")
    p.add_argument("--eta", type=float, help="KL weight")
    p.add_argument("--frames", type=int, help="velocity-change span in frames")
    p.add_argument("--window", type=int, help="training window length T")
    p.add_argument("--stride", type=int, help="stride between training windows")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--noise-sigma", type=float, help="augmentation noise std")
    p.add_argument("--t-max", type=int, help="cosine annealing period in epochs")
    p.add_argument("--target", choices=["1", "2", "both"], help="dancer(s) predicted in FULL steps")
    p.add_argument("--d-model", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--ff-dim", type=int)
    p.add_argument("--lstm-layers", type=int)
    p.add_argument("--conv-kernel", type=int)
    p.add_argument("--decoder-layers", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="generate a partner or a full duet")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", choices=["partner", "duet"], default="partner")
    p.add_argument("--leader", help="cleaned sequence holding the leading dancer and the context")
    p.add_argument("--target", type=int, choices=[1, 2], default=2, help="dancer to generate (default 2)")
    p.add_argument("--context", type=int, default=DEFAULT_CONTEXT, help="context frames (default 16)")
    p.add_argument("--length", type=int, default=64, help="frames to produce (default 64)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="generated.seq")
    p.add_argument("--csv", help="also write frame,dancer,joint,x,y,z animation CSV")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="horizon MSE report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", nargs="+", required=True, help="cleaned sequence files")
    p.add_argument("--horizons", default=",".join(map(str, DEFAULT_HORIZONS)))
    p.add_argument("--sequences", type=int, default=10, help="windows sampled (default 10)")
    p.add_argument("--context", type=int, default=DEFAULT_CONTEXT)
    p.add_argument("--target", type=int, choices=[1, 2], default=2)
    p.add_argument("--stride", type=int, default=32, help="stride between candidate windows")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="horizon_report.csv")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    outputs = _Outputs()
    try:
        args.func(args, outputs)
    except (DuetError, ValueError, OSError) as exc:
        outputs.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BaseException:
        outputs.cleanup()
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
