"""Command line: ``pageflat flatten | synth | score``.

Exit codes: 0 on success, 2 for usage and file errors, 3 when a pipeline
stage fails.  ``PAGEFLAT_LOG`` sets the log level (error, warn, info, debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import synth
from .errors import PageflatError, StageError
from .imagefile import image_format, read_image, write_image
from .mesh import GridLattice
from .pipeline import PipelineConfig, flatten

log = logging.getLogger("pageflat")

EXIT_OK, EXIT_IO, EXIT_STAGE = 0, 2, 3

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
           "info": logging.INFO, "debug": logging.DEBUG}


class _IOFailure(Exception):
    pass


def _grid(text: str) -> tuple[int, int]:
    try:
        m, n = text.lower().split("x")
        return int(m), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 30x30, got {text!r}") from None


def _pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(",")
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo,hi, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pageflat", description="Flatten photographed curved pages.")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("flatten", help="flatten a page photo")
    f.add_argument("input")
    f.add_argument("-o", "--output", required=True)
    f.add_argument("--config", help="JSON config file; flags given here override it")
    f.add_argument("--degree", type=int)
    f.add_argument("--grid", type=_grid, help="MxN lattice size, e.g. 30x30")
    f.add_argument("--threshold", type=int)
    f.add_argument("--mode", choices=("book", "single"))
    f.add_argument("--kink-angle", type=float, help="degrees")
    f.add_argument("--kink-window", type=int)
    f.add_argument("--gamma-clamp", type=_pair, help="lo,hi")
    f.add_argument("--curvature-as-printed", action="store_true", default=None)
    f.add_argument("--jobs", type=int, help="worker threads (0 = all cores)")
    f.add_argument("--format", dest="output_format", choices=("png", "jpeg", "jpg"))
    f.add_argument("--debug-overlay", dest="debug_dir", metavar="DIR")
    f.add_argument("--tiles-dir", metavar="DIR")
    f.add_argument("--report", metavar="JSON")
    f.add_argument("--lattice", metavar="JSON", help="write the recovered lattice in source pixels")
    f.add_argument("--save-config", metavar="JSON", help="write the effective config and continue")

    s = sub.add_parser("synth", help="render a synthetic scene with ground truth")
    s.add_argument("scene", help="scene JSON (use '-' for the built-in default scene)")
    s.add_argument("-o", "--output", required=True, metavar="DIR")

    c = sub.add_parser("score", help="score a flattened image against a ground-truth bundle")
    c.add_argument("result")
    c.add_argument("truth", metavar="TRUTH_DIR")
    c.add_argument("-o", "--output", metavar="JSON")
    c.add_argument("--mesh", help="recovered lattice JSON to compare with the true mesh")
    return ap


def config_from_args(args) -> PipelineConfig:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise _IOFailure(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(base, dict):
            raise _IOFailure(f"config {args.config} must hold a JSON object")
    overrides = {
        "degree": args.degree,
        "grid": args.grid,
        "threshold": args.threshold,
        "mode": args.mode,
        "kink_angle": math.radians(args.kink_angle) if args.kink_angle is not None else None,
        "kink_window": args.kink_window,
        "gamma_clamp": args.gamma_clamp,
        "curvature_as_printed": args.curvature_as_printed,
        "jobs": args.jobs,
        "debug_dir": args.debug_dir,
        "tiles_dir": args.tiles_dir,
        "output": args.output,
        "output_format": args.output_format,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig.from_dict(base)


def _write_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read(path):
    try:
        return read_image(path)
    except (OSError, ValueError) as exc:
        raise _IOFailure(f"cannot read image {path}: {exc}") from exc


def cmd_flatten(args) -> int:
    try:
        cfg = config_from_args(args)
    except (TypeError, ValueError) as exc:
        raise _IOFailure(f"bad configuration: {exc}") from exc
    try:
        image_format(cfg.output, cfg.output_format)
    except ValueError as exc:
        raise _IOFailure(str(exc)) from exc
    if args.save_config:
        cfg.save(args.save_config)
    img = _read(args.input)
    result = flatten(img, cfg)
    try:
        write_image(result.image, cfg.output, cfg.output_format)
        if args.report:
            _write_json(result.report, args.report)
        if args.lattice:
            lats = [lat.to_json() for lat in result.lattices]
            _write_json(lats[0] if len(lats) == 1 else lats, args.lattice)
    except OSError as exc:
        raise _IOFailure(f"cannot write output: {exc}") from exc
    log.info("wrote %s (%dx%d) in %.2fs", cfg.output, result.image.width, result.image.height,
             result.report["total_seconds"])
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        if args.scene == "-":
            scene, spec = synth.scene_from_dict({})
        else:
            scene, spec = synth.load_scene(args.scene)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise _IOFailure(f"bad scene {args.scene}: {exc}") from exc
    try:
        truth = synth.render(scene, spec)
    except PageflatError as exc:
        raise StageError("synth", exc, "check camera distance and height profile") from exc
    try:
        synth.save_bundle(truth, args.output)
    except OSError as exc:
        raise _IOFailure(f"cannot write bundle: {exc}") from exc
    return EXIT_OK


def cmd_score(args) -> int:
    result = _read(args.result)
    try:
        truth = synth.load_bundle(args.truth)
        mesh = GridLattice.from_json(json.loads(Path(args.mesh).read_text())) if args.mesh else None
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise _IOFailure(f"cannot load ground truth: {exc}") from exc
    try:
        metrics = synth.score(result, truth, mesh)
    except ValueError as exc:
        raise StageError("score", exc, "result and truth must come from the same scene") from exc
    if args.output:
        _write_json(metrics, args.output)
    else:
        print(json.dumps(metrics, indent=2, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    level = _LEVELS.get(os.environ.get("PAGEFLAT_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    handler = {"flatten": cmd_flatten, "synth": cmd_synth, "score": cmd_score}[args.command]
    try:
        return handler(args)
    except _IOFailure as exc:
        print(f"pageflat: [io] {exc}", file=sys.stderr)
        return EXIT_IO
    except StageError as exc:
        print(f"pageflat: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
