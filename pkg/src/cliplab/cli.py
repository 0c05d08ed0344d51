"""Command-line interface: dataset generation, rendering, oracle evaluation,
MLP training, preset experiment runs, and scoring of external predictions."""

from __future__ import annotations

import argparse
import glob
import os
import sys

import numpy as np

from . import __version__
from .clipgen import (GenConfig, config_to_dict, generate_classes,
                      read_geometry_dir, write_geometry_dir)
from .harness import (ConditionFailed, ExperimentConfig, MlpAdapter, PRESETS,
                      build_classifier, clips_from_manifest, evaluate,
                      manifest_train_poses, profile_from_predictions,
                      profile_rows, profile_svg, read_prediction_csv,
                      run_preset, training_views_of, write_results_csv)
from .mlp import TrainConfig, load_model, save_model, train
from .render import RasterImage, emit_dataset, read_manifest
from .scene import (ALL_AXES, Camera, DUAL_AXES, SINGLE_AXES, parse_view_spec,
                    pose_grid)

REPRESENTATIONS = ("wireframe", "coordimage", "coordarray")


def _axes_list(spec: str) -> list[str]:
    """'single' -> x,y,z; 'dual' -> xy,xz,yz; 'all' -> both; else comma list."""
    spec = spec.strip().lower()
    if spec == "single":
        return list(SINGLE_AXES)
    if spec == "dual":
        return list(DUAL_AXES)
    if spec == "all":
        return list(ALL_AXES)
    axes = [a.strip() for a in spec.split(",") if a.strip()]
    for a in axes:
        if a not in ALL_AXES:
            raise ValueError(f"unknown axes {a!r}")
    if not axes:
        raise ValueError("empty axes list")
    return axes


def cmd_gen(args) -> int:
    config = GenConfig(seed=args.seed)
    clips = generate_classes(config, args.classes)
    path = write_geometry_dir(clips, config, args.out)
    print(f"wrote {len(clips)} paperclips to {path}")
    return 0


def cmd_render(args) -> int:
    clips, config = read_geometry_dir(args.geometry)
    cam = Camera(mode=args.projection, image_size=args.image_size)
    poses = pose_grid(_axes_list(args.axes), single_stride=args.stride,
                      dual_stride=args.dual_stride)
    train_poses = parse_view_spec(args.train_views) if args.train_views else None
    backgrounds = None
    if args.bg_dir:
        paths = sorted(glob.glob(os.path.join(args.bg_dir, "*.png")))
        if not paths:
            raise FileNotFoundError(f"no .png files in {args.bg_dir}")
        backgrounds = [RasterImage.load_png(p) for p in paths]
    manifest = emit_dataset(
        clips, poses, args.repr, args.out, cam=cam, seed=config.seed,
        coord_bins=args.coord_bins, train_poses=train_poses,
        backgrounds=backgrounds,
        generator_config={"config": config_to_dict(config),
                          "num_classes": len(clips)})
    print(f"wrote {len(manifest['records'])} records "
          f"({args.repr}) to {args.out}")
    return 0


def cmd_oracle(args) -> int:
    man = read_manifest(args.manifest)
    clips = clips_from_manifest(man)
    cam = Camera.from_json(man["camera"])
    train_poses = parse_view_spec(args.train_views)
    clf = build_classifier(args.kind, clips, train_poses, cam,
                           inplane=args.inplane)
    rows = []
    for axes in _axes_list(args.eval_grid):
        prof = evaluate(clf, man, axes, train_poses)
        rows.extend(profile_rows(prof, args.kind, int(man.get("seed", 0))))
        print(f"{args.kind} {axes}: mean accuracy {prof.mean():.4f}")
    write_results_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_train_mlp(args) -> int:
    man = read_manifest(args.manifest)
    clips = clips_from_manifest(man)
    if args.classes is not None:
        if args.classes > len(clips):
            raise ValueError(f"--classes {args.classes} exceeds manifest's "
                             f"{len(clips)} classes")
        clips = clips[:args.classes]
    cam = Camera.from_json(man["camera"])
    train_poses = parse_view_spec(args.train_views)
    config = TrainConfig(epochs=args.epochs, lr=args.lr, seed=args.seed)
    if args.inplane:
        from dataclasses import replace
        config = replace(config, inplane_rotation_deg=(0.0, 360.0))
    views, labels = training_views_of(clips, train_poses, cam)
    bins = int(man.get("coord_bins", 64))
    params, log = train(views, labels, len(clips), cam, config, bins)
    save_model(params, args.out)
    print(f"trained {len(clips)} classes x {len(train_poses)} views "
          f"for {config.epochs} epochs: final loss {log.loss[-1]:.4f}, "
          f"train accuracy {log.accuracy[-1]:.4f}")
    print(f"wrote model to {args.out}")
    return 0


def cmd_run(args) -> int:
    config = ExperimentConfig(
        preset=args.preset, classifier=args.classifier, classes=args.classes,
        seeds=tuple(int(s) for s in args.seeds.split(",")), out_dir=args.out,
        eval_axes=tuple(_axes_list(args.axes)), epochs=args.epochs,
        view_offset=args.view_offset)
    bundle = run_preset(config)
    for entry in bundle["summary"]:
        gap = entry.get("gap_to_baseline")
        gap_s = f" gap {gap:+.3f}" if gap is not None else ""
        print(f"{entry['condition']} seed {entry['seed']} {entry['axes']}: "
              f"mean {entry['mean']:.4f}{gap_s}")
    print(f"wrote {bundle['csv_path']} and {len(bundle['svg_paths'])} plots")
    return 0


def cmd_evaluate(args) -> int:
    rows = []
    axes_list = _axes_list(args.axes)
    if args.external:
        records = read_prediction_csv(args.external)
        profiles = {axes: profile_from_predictions(records, axes)
                    for axes in axes_list}
        condition, seed = "external", 0
    else:
        if not (args.model and args.manifest):
            raise ValueError("evaluate needs --external CSV, or --model with "
                             "--manifest")
        man = read_manifest(args.manifest)
        params = load_model(args.model)
        clips = clips_from_manifest(man)
        n_out = params.sizes[-1]
        if n_out > len(clips):
            raise ValueError(f"model has {n_out} outputs but manifest has "
                             f"{len(clips)} classes")
        clips = clips[:n_out]
        cam = Camera.from_json(man["camera"])
        adapter = MlpAdapter(params, cam, np.arange(n_out),
                             params.sizes[0] // 2)
        train_poses = manifest_train_poses(man)
        profiles = {axes: evaluate(adapter, man, axes, train_poses)
                    for axes in axes_list}
        condition, seed = "mlp", int(man.get("seed", 0))
    for axes, prof in profiles.items():
        rows.extend(profile_rows(prof, condition, seed))
        print(f"{condition} {axes}: mean accuracy {prof.mean():.4f}")
        if args.svg_dir:
            os.makedirs(args.svg_dir, exist_ok=True)
            out = os.path.join(args.svg_dir, f"{condition}_{axes}.svg")
            with open(out, "w") as fh:
                fh.write(profile_svg(prof, title=f"{condition} {axes}-axis"))
    write_results_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cliplab",
        description="Paperclip view-generalization laboratory")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate paperclip geometry")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--classes", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("render", help="render a pose grid to a dataset")
    r.add_argument("--geometry", required=True, help="geometry dir from `gen`")
    r.add_argument("--axes", default="y",
                   help="single|dual|all or comma list (e.g. y or x,y,xy)")
    r.add_argument("--stride", type=float, default=1.0,
                   help="single-axis grid stride in degrees")
    r.add_argument("--dual-stride", type=float, default=10.0)
    r.add_argument("--repr", choices=REPRESENTATIONS, required=True)
    r.add_argument("--bg-dir", default=None,
                   help="directory of background PNGs to composite")
    r.add_argument("--train-views", default=None,
                   help='tag these poses split=train (e.g. "y:0,30,60")')
    r.add_argument("--projection", choices=("orthographic", "perspective"),
                   default="orthographic")
    r.add_argument("--image-size", type=int, default=224)
    r.add_argument("--coord-bins", type=int, default=64)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_render)

    o = sub.add_parser("oracle", help="run a classical recognition oracle")
    o.add_argument("--kind", choices=("match2d", "lc", "align3d"), required=True)
    o.add_argument("--manifest", required=True)
    o.add_argument("--train-views", required=True, help='e.g. "y:0,30,60"')
    o.add_argument("--eval-grid", default="single",
                   help="single|dual|all or comma list of axes")
    o.add_argument("--inplane", action="store_true",
                   help="rotation-aligned matching (match2d only)")
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_oracle)

    t = sub.add_parser("train-mlp", help="train the native MLP classifier")
    t.add_argument("--manifest", required=True)
    t.add_argument("--train-views", required=True, help='e.g. "y:uniform:12"')
    t.add_argument("--classes", type=int, default=None)
    t.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    t.add_argument("--lr", type=float, default=TrainConfig.lr)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--inplane", action="store_true",
                   help="add in-plane rotation augmentation")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train_mlp)

    u = sub.add_parser("run", help="run an experiment preset")
    u.add_argument("--preset", choices=sorted(PRESETS), required=True)
    u.add_argument("--classifier", choices=("mlp", "match2d", "lc", "align3d"),
                   default="match2d")
    u.add_argument("--classes", type=int, default=None)
    u.add_argument("--seeds", default="0,1,2")
    u.add_argument("--axes", default="all")
    u.add_argument("--epochs", type=int, default=None)
    u.add_argument("--view-offset", type=float, default=0.0)
    u.add_argument("--out", required=True)
    u.set_defaults(func=cmd_run)

    e = sub.add_parser("evaluate",
                       help="score an external prediction CSV or a saved model")
    e.add_argument("--external", default=None, help="prediction CSV path")
    e.add_argument("--model", default=None, help="model.bin from train-mlp")
    e.add_argument("--manifest", default=None)
    e.add_argument("--axes", default="y")
    e.add_argument("--svg-dir", default=None)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConditionFailed as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
