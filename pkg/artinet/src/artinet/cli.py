"""Minimal CLI: train on a corpus, export scores, or run LOPO end to end."""

import argparse
import dataclasses
import sys
from pathlib import Path

from .config import ArtinetConfig
from .data import load_examples
from .export import export_scores
from .lopo import run_lopo
from .train import load_checkpoint, save_checkpoint, save_training_log, train_corpus


def _cfg_from_args(args) -> ArtinetConfig:
    cfg = ArtinetConfig()
    overrides = {}
    for name in ("channels", "steps", "batch", "seed"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return dataclasses.replace(cfg, **overrides)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="artinet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--manifest", required=True, help="corpus manifest CSV")
        p.add_argument("--channels", type=int, default=None)
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--batch", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", help="train and write checkpoint + log")
    common(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("export", help="export row scores from a checkpoint")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scores", required=True, help="output score CSV")

    p = sub.add_parser("lopo", help="leave-one-patient-out scores")
    common(p)
    p.add_argument("--scores", required=True, help="output score CSV")

    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            cfg = _cfg_from_args(args)
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            result, _ = train_corpus(args.manifest, cfg)
            save_checkpoint(out / "checkpoint.pt", result.model)
            save_training_log(out / "training-log.json", cfg, result.losses)
            print(f"final loss {result.losses[-1]:.4f} -> {out}")
        elif args.command == "export":
            model = load_checkpoint(args.checkpoint)
            examples = load_examples(args.manifest, model.cfg)
            n = export_scores(args.scores, model, examples)
            print(f"wrote {n} row scores to {args.scores}")
        elif args.command == "lopo":
            cfg = _cfg_from_args(args)
            n = run_lopo(args.manifest, cfg, args.scores)
            print(f"wrote {n} pooled LOPO row scores to {args.scores}")
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
