"""Command-line interface.

Subcommands:
  gen  - write a suite of procedurally generated scenes
  run  - initialize + refine disparity on a scene (or every scene with --all)
  viz  - render a PFM field to a color-mapped PNG

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from typing import List, Optional

from .errors import FormatError, NumericalError
from .fileio import load_pfm_raw
from .losses import LossWeights
from .pipeline import RunConfig, _write_json, aggregate_reports, run_scene_dir
from .synth import TEXTURE_KINDS, SceneConfig, generate_suite
from .viz import render_field_png

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we reserve that for I/O
        raise _UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="tridisp", description="Multiscopic disparity toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a scene suite", parents=[], add_help=True)
    g.add_argument("--count", type=int, required=True, help="number of scenes (>= 1)")
    g.add_argument("--seed", type=int, default=0, help="base seed; scene i uses seed+i")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--width", type=int, default=256)
    g.add_argument("--height", type=int, default=192)
    g.add_argument("--layers", type=int, default=5)
    g.add_argument("--texture", choices=TEXTURE_KINDS, default="noise")
    g.add_argument("--baseline", type=float, default=0.1, help="meters")
    g.add_argument("--focal", type=float, default=160.0, help="pixels")
    g.add_argument("--depth-min", type=float, default=1.8, help="meters")
    g.add_argument("--depth-max", type=float, default=12.0, help="meters")
    g.add_argument("--dmax", type=int, default=16)

    r = sub.add_parser("run", help="run the matcher + refiner on a scene")
    r.add_argument("scene_dir", help="scene directory (or suite directory with --all)")
    r.add_argument("--all", action="store_true", help="process every scene_* subdirectory")
    r.add_argument("--out", default=None, help="output directory (default <scene>/out)")
    r.add_argument("--mode", choices=("multiscopic", "stereo"), default="multiscopic")
    r.add_argument("--iters", type=int, default=None)
    r.add_argument("--levels", type=int, default=None)
    r.add_argument("--dmax", type=int, default=None)
    r.add_argument("--tau", type=float, default=None)
    r.add_argument("--init", choices=("wta", "soft"), default=None)
    r.add_argument("--lr-d", type=float, default=None)
    r.add_argument("--lr-s", type=float, default=None)
    for i in (1, 2, 3, 4):
        r.add_argument(f"--lambda{i}", type=float, default=None)

    v = sub.add_parser("viz", help="render a PFM field as a color PNG")
    v.add_argument("field", help="input .pfm")
    v.add_argument("out", help="output .png")
    v.add_argument("--colormap", default="jet")
    return p


def _gen(args) -> int:
    cfg = SceneConfig(
        width=args.width,
        height=args.height,
        baseline_m=args.baseline,
        focal_px=args.focal,
        depth_min_m=args.depth_min,
        depth_max_m=args.depth_max,
        layer_count=args.layers,
        texture=args.texture,
        d_max=args.dmax,
    )
    dirs = generate_suite(args.count, args.seed, args.out, cfg)
    print(f"wrote {len(dirs)} scenes under {args.out}")
    return EXIT_OK


def _run_config(args) -> tuple:
    cfg = RunConfig(mode=args.mode)
    overridden = {}
    lam = {}
    for i in (1, 2, 3, 4):
        val = getattr(args, f"lambda{i}")
        if val is not None:
            lam[f"lambda{i}"] = val
            overridden[f"lambda{i}"] = val
    if lam:
        cfg = replace(cfg, weights=replace(LossWeights(), **lam))
    simple = {
        "iters": "iterations",
        "levels": "pyramid_levels",
        "dmax": "d_max",
        "tau": "tau",
        "init": "init",
        "lr_d": "lr_d",
        "lr_s": "lr_s",
    }
    for arg_name, field_name in simple.items():
        val = getattr(args, arg_name)
        if val is not None:
            cfg = replace(cfg, **{field_name: val})
            overridden[field_name] = val
    if args.mode != "multiscopic":
        overridden["mode"] = args.mode
    return cfg, overridden


def _run(args) -> int:
    cfg, overridden = _run_config(args)
    if args.all:
        scenes = sorted(
            d
            for d in os.listdir(args.scene_dir)
            if d.startswith("scene_") and os.path.isdir(os.path.join(args.scene_dir, d))
        )
        if not scenes:
            raise FileNotFoundError(f"{args.scene_dir}: no scene_* subdirectories")
        reports = {}
        for name in scenes:
            scene = os.path.join(args.scene_dir, name)
            out = os.path.join(args.out, name) if args.out else os.path.join(scene, "out")
            reports[name] = run_scene_dir(scene, out, cfg, overridden)
            print(f"{name}: done")
        summary_dir = args.out or args.scene_dir
        os.makedirs(summary_dir, exist_ok=True)
        _write_json(aggregate_reports(reports), os.path.join(summary_dir, "summary.json"))
        return EXIT_OK
    out = args.out or os.path.join(args.scene_dir, "out")
    report = run_scene_dir(args.scene_dir, out, cfg, overridden)
    if report is not None:
        print(
            "epe={epe:.4f} bad05={bad05:.2f}% bad1={bad1:.2f}% bad2={bad2:.2f}% "
            "d1_all={d1_all:.2f}%".format(**report)
        )
    print(f"outputs in {out}")
    return EXIT_OK


def _viz(args) -> int:
    field = load_pfm_raw(args.field)
    render_field_png(field, args.out, colormap=args.colormap)
    print(f"wrote {args.out}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "gen":
            return _gen(args)
        if args.command == "run":
            return _run(args)
        return _viz(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (FormatError, FileNotFoundError, IsADirectoryError, PermissionError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
