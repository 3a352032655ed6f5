"""Debug artifacts: overlay PNG, rectified page, landmark/lattice/curve JSON."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .imagefile import write_image
from .raster import Raster
from .warp import rectify_global

GREEN = (0, 200, 0)
RED = (230, 0, 0)
BLUE = (0, 80, 255)
YELLOW = (240, 200, 0)


def _rgb(img: Raster) -> np.ndarray:
    d = img.data
    return np.repeat(d[..., None], 3, axis=2).copy() if d.ndim == 2 else d.copy()


def _plot(canvas: np.ndarray, pts, color, radius: int = 0):
    h, w = canvas.shape[:2]
    p = np.rint(np.asarray(pts, dtype=np.float64).reshape(-1, 2)).astype(int)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            x, y = p[:, 0] + dx, p[:, 1] + dy
            ok = (x >= 0) & (x < w) & (y >= 0) & (y < h)
            canvas[y[ok], x[ok]] = color


def _segments(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = max(int(np.ceil(np.hypot(*(b - a)))), 1) + 1
    t = np.linspace(0, 1, n)[:, None]
    return a * (1 - t) + b * t


def draw_lattice(canvas: np.ndarray, grid: np.ndarray, color=YELLOW):
    rows, cols = grid.shape[:2]
    for j in range(rows):
        for i in range(cols):
            if i + 1 < cols:
                _plot(canvas, _segments(grid[j, i], grid[j, i + 1]), color)
            if j + 1 < rows:
                _plot(canvas, _segments(grid[j, i], grid[j + 1, i]), color)


def overlay(img: Raster, contour_pts, outline, lattices=()) -> Raster:
    canvas = _rgb(img)
    _plot(canvas, contour_pts, GREEN)
    for lat in lattices:
        draw_lattice(canvas, lat.grid)
    _plot(canvas, outline.corners, RED, radius=4)
    if outline.is_book:
        _plot(canvas, [outline.spine_top, outline.spine_bottom], BLUE, radius=4)
    return Raster(canvas)


def write_debug(directory, img, page, result, to_rect, out_w, out_h, rect_pts):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_image(overlay(img, page.points, result.outline, result.lattices), d / "overlay.png")
    pad_x = int(np.ceil(max(0.0, -rect_pts[:, 0].min(), rect_pts[:, 0].max() - (out_w - 1)))) + 2
    pad_y = int(np.ceil(max(0.0, -rect_pts[:, 1].min(), rect_pts[:, 1].max() - (out_h - 1)))) + 2
    rect = rectify_global(img, result.outline.corners, out_w, out_h, pad=(pad_x, pad_y))
    write_image(rect, d / "rectified.png")
    (d / "landmarks.json").write_text(json.dumps(result.outline.to_json(), indent=2))
    (d / "lattice.json").write_text(json.dumps([s.lattice.to_json() for s in result.surfaces]))
    (d / "curves.json").write_text(json.dumps(
        [{name: c.to_json() for name, c in s.curves.items()} for s in result.surfaces], indent=2))
