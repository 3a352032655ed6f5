"""End-to-end flattening: outline -> rectification -> mesh -> tiles."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import contour as ct
from .errors import PageflatError, StageError
from .imagefile import write_image
from .mesh import GridLattice, GridSpec, build_lattice, build_series, extract_blocks, interval_points, EPSILON
from .polyfit import PolyCurve, evolve_family, fit
from .raster import Raster, binarize_otsu, to_grayscale
from .warp import (
    TileLayout,
    concat_horizontal,
    global_homography,
    recombine,
    warp_blocks,
)

log = logging.getLogger(__name__)

HINTS = {
    "grayscale": "input must be an 8-bit gray or RGB image",
    "binarize": "the page needs a clear contrast against the background; try --threshold",
    "trace": "no page region found; check --threshold",
    "quadrilateral": "the page outline is not roughly four-sided; crop the photo or raise contrast",
    "rectify_global": "page corners are degenerate",
    "kinks": "no spine kinks found; lower --kink-angle or use --mode single",
    "split": "outline landmarks do not sit on the contour",
    "fit": "a boundary is too short for the polynomial degree; lower --degree",
    "series": "curvature undefined; drop --curvature-as-printed",
    "evolve": "boundary fits are inconsistent",
    "lattice": "evolved curves fold over each other; lower --degree or the grid size",
    "blocks": "lattice produced degenerate blocks",
    "warp": "a mesh block is degenerate; lower the grid size",
    "recombine": "tile layout mismatch",
}


@dataclass
class PipelineConfig:
    degree: int = 4
    grid: tuple[int, int] = (30, 30)
    threshold: int | None = None
    kink_angle: float = math.radians(30.0)
    kink_window: int = 5
    gamma_clamp: tuple[float, float] = (0.1, 10.0)
    mode: str = "single"
    epsilon: float = EPSILON
    curvature_as_printed: bool = False
    jobs: int = 0
    debug_dir: str | None = None
    tiles_dir: str | None = None
    output: str | None = None
    output_format: str | None = None

    def __post_init__(self):
        self.grid = tuple(int(g) for g in self.grid)
        self.gamma_clamp = tuple(float(g) for g in self.gamma_clamp)
        if not 2 <= self.degree:
            raise ValueError("degree must be >= 2")
        if len(self.grid) != 2 or min(self.grid) < 2:
            raise ValueError("grid needs M, N >= 2")
        if not 0 < self.gamma_clamp[0] <= self.gamma_clamp[1]:
            raise ValueError("gamma clamp needs 0 < lo <= hi")
        if self.mode not in ("book", "single"):
            raise ValueError("mode must be 'book' or 'single'")
        if self.kink_window < 1:
            raise ValueError("kink window must be >= 1")
        if self.threshold is not None and not 0 <= self.threshold <= 255:
            raise ValueError("threshold must lie in [0, 255]")

    @property
    def spec(self) -> GridSpec:
        return GridSpec(*self.grid)

    @property
    def workers(self) -> int:
        return self.jobs if self.jobs > 0 else (os.cpu_count() or 1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = list(self.grid)
        d["gamma_clamp"] = list(self.gamma_clamp)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class SurfaceResult:
    boundary: ct.SurfaceBoundary
    curves: dict[str, PolyCurve]
    lattice_rect: GridLattice
    lattice: GridLattice
    layout: TileLayout
    columns: np.ndarray
    rows: np.ndarray
    clamped: dict[str, int]


@dataclass
class FlattenResult:
    image: Raster
    outline: ct.PageOutline
    surfaces: list[SurfaceResult]
    report: dict = field(default_factory=dict)

    @property
    def lattices(self) -> list[GridLattice]:
        return [s.lattice for s in self.surfaces]


class _Stages:
    def __init__(self):
        self.timings: dict[str, float] = {}

    @contextmanager
    def __call__(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except (PageflatError, ValueError, np.linalg.LinAlgError) as exc:
            raise StageError(name, exc, HINTS.get(name, "")) from exc
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0


def _side_tilt_deg(curve: PolyCurve) -> float:
    lo, hi = curve.domain
    dx = float(curve(hi) - curve(lo))
    return math.degrees(math.atan2(abs(dx), hi - lo))


def _surface_mesh(surface: ct.SurfaceBoundary, cfg: PipelineConfig, stage) -> tuple:
    M, N = cfg.grid
    corners = surface.corners  # TL, TR, BR, BL
    x0, x1 = min(corners[0, 0], corners[3, 0]), max(corners[1, 0], corners[2, 0])
    y0, y1 = min(corners[0, 1], corners[1, 1]), max(corners[2, 1], corners[3, 1])
    with stage("fit"):
        curves = {
            "top": fit(surface.top, cfg.degree, "x", (x0, x1)),
            "bottom": fit(surface.bottom, cfg.degree, "x", (x0, x1)),
            "left": fit(surface.left, cfg.degree, "y", (y0, y1)),
            "right": fit(surface.right, cfg.degree, "y", (y0, y1)),
        }
    with stage("evolve"):
        horizontal = evolve_family(curves["top"], curves["bottom"], max(4 * N, 64))
        vertical = evolve_family(curves["left"], curves["right"], max(4 * M, 64))
    with stage("series"):
        col_series = build_series(curves["top"], curves["bottom"], M, cfg.epsilon, cfg.gamma_clamp,
                                  cfg.curvature_as_printed)
        row_series = build_series(curves["left"], curves["right"], N, cfg.epsilon, cfg.gamma_clamp,
                                  cfg.curvature_as_printed)
        xs = interval_points(col_series, x0, x1)
        ys = interval_points(row_series, y0, y1)
    with stage("lattice"):
        lattice = build_lattice(vertical, xs, horizontal, ys)
    clamped = {"columns": col_series.clamped, "rows": row_series.clamped}
    return curves, lattice, xs, ys, clamped, (x0, x1, y0, y1)


def flatten(img: Raster, cfg: PipelineConfig | None = None) -> FlattenResult:
    """Run the whole pipeline on an in-memory image."""
    cfg = cfg or PipelineConfig()
    stage = _Stages()
    t_start = time.perf_counter()
    M, N = cfg.grid

    with stage("grayscale"):
        gray = to_grayscale(img) if img.channels == 3 else img
    with stage("binarize"):
        mask = binarize_otsu(gray, cfg.threshold)
    with stage("trace"):
        borders = ct.trace_borders(mask)
        if not borders:
            raise PageflatError("no foreground region")
        page = borders[0]
    with stage("quadrilateral"):
        corners, corner_idx = ct.approx_quadrilateral(page, return_indices=True)
    with stage("rectify_global"):
        out_w = int(round(0.5 * (np.hypot(*(corners[1] - corners[0])) + np.hypot(*(corners[2] - corners[3]))))) + 1
        out_h = int(round(0.5 * (np.hypot(*(corners[3] - corners[0])) + np.hypot(*(corners[2] - corners[1]))))) + 1
        to_rect = global_homography(corners, out_w, out_h)
        to_src = to_rect.inverse()
        rect_pts = to_rect.apply(page.points.astype(np.float64))

    spine_idx = (None, None)
    if cfg.mode == "book":
        with stage("kinks"):
            spine_idx = ct.detect_spine(rect_pts, corner_idx, cfg.kink_window, cfg.kink_angle)
            if None in spine_idx:
                raise PageflatError(f"expected 2 spine kinks, found {sum(i is not None for i in spine_idx)}")
    with stage("split"):
        if cfg.mode == "book":
            outline_rect = ct.PageOutline(rect_pts[corner_idx], rect_pts[spine_idx[0]], rect_pts[spine_idx[1]])
        else:
            outline_rect = ct.PageOutline(rect_pts[corner_idx])
        boundaries = ct.split_surfaces(rect_pts, outline_rect)

    surfaces = []
    for boundary in boundaries:
        curves, lat_rect, xs, ys, clamped, (x0, x1, _, _) = _surface_mesh(boundary, cfg, stage)
        with stage("blocks"):
            lattice = GridLattice(to_src.apply(lat_rect.points), lat_rect.spec)
            layout = TileLayout(max(1, round((x1 - x0) / (M - 1))), max(1, round((out_h - 1) / (N - 1))),
                                M - 1, N - 1)
            blocks = extract_blocks(lattice)
        surfaces.append((boundary, curves, lat_rect, lattice, layout, blocks, xs, ys, clamped))

    results, tiles_out = [], []
    for s_idx, (boundary, curves, lat_rect, lattice, layout, blocks, xs, ys, clamped) in enumerate(surfaces):
        with stage("warp"):
            tiles = warp_blocks(img, blocks, layout, jobs=cfg.workers)
        with stage("recombine"):
            tiles_out.append(recombine(tiles, layout))
        if cfg.tiles_dir:
            for k, t in tiles.items():
                write_image(t, Path(cfg.tiles_dir) / f"surface{s_idx}_k{k:05d}.png")
        results.append(SurfaceResult(boundary, curves, lat_rect, lattice, layout, xs, ys, clamped))
    with stage("concatenate"):
        out = concat_horizontal(tiles_out)

    spine_src = [to_src.apply(outline_rect.spine_top), to_src.apply(outline_rect.spine_bottom)] \
        if outline_rect.is_book else [None, None]
    outline = ct.PageOutline(to_src.apply(outline_rect.corners), *spine_src)
    total = time.perf_counter() - t_start

    report = {
        "mode": cfg.mode,
        "grid": {"M": M, "N": N},
        "degree": cfg.degree,
        "threshold": int(mask.threshold),
        "output_size": [out.width, out.height],
        "timings": {k: round(v, 6) for k, v in stage.timings.items()},
        "total_seconds": round(total, 6),
        "clamped_gamma": sum(sum(r.clamped.values()) for r in results),
        "surfaces": [],
        "outline": outline.to_json(),
    }
    for r in results:
        tilts = {side: _side_tilt_deg(r.curves[side]) for side in ("left", "right")}
        report["surfaces"].append({
            "fit_rms": {name: c.rms for name, c in r.curves.items()},
            "clamped_gamma": r.clamped,
            "side_tilt_deg": tilts,
            "side_not_vertical": any(t > 5.0 for t in tilts.values()),
            "cell": [r.layout.cell_w, r.layout.cell_h],
        })
        if any(t > 5.0 for t in tilts.values()):
            log.warning("page side deviates from vertical by more than 5 degrees: %s", tilts)

    result = FlattenResult(out, outline, results, report)
    if cfg.debug_dir:
        from .debug import write_debug
        write_debug(cfg.debug_dir, img, page, result, to_rect, out_w, out_h, rect_pts)
    return result
