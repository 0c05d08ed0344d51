"""Command-line interface mirroring the harness flags: train a backbone on a
rendered dataset, then emit predictions for `cliplab evaluate --external`."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .data import ManifestError, load_manifest
from .predict import ClassCountMismatch, emit_predictions
from .train import (DivergedTraining, TrainHyper, load_checkpoint,
                    save_checkpoint, train_backbone, training_accuracy)


def cmd_train(args) -> int:
    man = load_manifest(args.manifest)
    hyper = TrainHyper(epochs=args.epochs, batch_size=args.batch_size,
                       lr=args.lr, seed=args.seed, flip=not args.no_flip,
                       crop_padding=args.crop_padding, workers=args.workers)
    ckpt = train_backbone(man, args.train_views, hyper)
    save_checkpoint(ckpt, args.out)
    print(f"trained {len(ckpt['classes'])} classes on "
          f"{ckpt['train_records']} views for {hyper.epochs} epochs: "
          f"final loss {ckpt['log']['loss'][-1]:.4f}, "
          f"train accuracy {training_accuracy(ckpt):.4f}")
    print(f"wrote checkpoint to {args.out}")
    return 0


def cmd_predict(args) -> int:
    man = load_manifest(args.manifest)
    ckpt = load_checkpoint(args.checkpoint)
    rows = emit_predictions(ckpt, man, args.out, axes=args.axes,
                            batch_size=args.batch_size)
    print(f"wrote {rows} predictions to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="clipbridge",
        description="Image-backbone trainer for rendered view datasets")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a ResNet-18 on training views")
    t.add_argument("--manifest", required=True,
                   help="dataset_manifest.json (or its directory)")
    t.add_argument("--train-views", default=None,
                   help='view spec (e.g. "y:uniform:12"); default: the '
                        "manifest's split=train tags")
    t.add_argument("--epochs", type=int, default=TrainHyper.epochs)
    t.add_argument("--batch-size", type=int, default=TrainHyper.batch_size)
    t.add_argument("--lr", type=float, default=TrainHyper.lr)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--no-flip", action="store_true")
    t.add_argument("--crop-padding", type=int, default=TrainHyper.crop_padding)
    t.add_argument("--workers", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("predict",
                       help="emit the prediction CSV for a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--manifest", required=True)
    e.add_argument("--axes", default=None,
                   help="restrict to one grid (e.g. y); default: all records")
    e.add_argument("--batch-size", type=int, default=256)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ManifestError, ClassCountMismatch, DivergedTraining) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
