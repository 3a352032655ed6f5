"""Synthetic curved pages with exact ground truth, and the scoring metrics.

A scene is a flat page of ``width x height`` pixels lifted onto a height
profile ``z(u)`` and photographed by an ideal pinhole camera looking down at
the page centre from ``distance`` pixels, optionally tilted about the page's
horizontal axis.  The focal length equals the distance, so the ``z = 0`` plane
images at unit scale and an untilted flat page renders pixel-for-pixel.

World frame: ``X = u - (W-1)/2``, ``Y = v - (H-1)/2`` (rows down), ``Z = z``
towards the camera.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .contour import PageOutline
from .errors import InvalidCameraError
from .imagefile import read_image, write_image
from .mesh import GridLattice, GridSpec
from .polyfit import PolyCurve, eval_poly, deriv, fit
from .raster import Raster, sample_bilinear, to_grayscale, to_uint8

PAPER = 235
INK = 30
BACKGROUND = 25


@dataclass(frozen=True)
class PageContent:
    """Flat page pattern and where its horizontal rules sit."""

    raster: Raster
    line_rows: tuple[float, ...]
    content_box: tuple[int, int, int, int]  # u0, v0, u1, v1


def page_content(width: int, height: int, seed: int = 0, spacing: int = 100, margin: int = 40,
                 stroke: float = 1.5) -> PageContent:
    """Ruled grid with rows of pseudo-glyphs between the horizontal rules.

    Rules are box-filtered so their edges carry partial coverage.  Glyphs are
    random 3x5 bit patterns drawn on a 3-px cell grid; they keep at least 15 px
    clear of every rule.
    """
    rng = np.random.default_rng(seed)
    u0, v0 = margin, margin
    u1, v1 = width - 1 - margin, height - 1 - margin
    ink = np.zeros((height, width))
    uu = np.arange(width, dtype=np.float64)
    vv = np.arange(height, dtype=np.float64)

    rows = tuple(float(r) for r in np.arange(v0, v1 + 1e-9, spacing))
    cols = np.arange(u0, u1 + 1e-9, spacing)
    in_u = (uu >= u0 - stroke) & (uu <= u1 + stroke)
    in_v = (vv >= v0 - stroke) & (vv <= v1 + stroke)
    for r in rows:
        cov = np.clip(stroke + 0.5 - np.abs(vv - r), 0.0, 1.0) * in_v
        ink = np.maximum(ink, cov[:, None] * in_u[None, :])
    for c in cols:
        cov = np.clip(stroke + 0.5 - np.abs(uu - c), 0.0, 1.0) * in_u
        ink = np.maximum(ink, cov[None, :] * in_v[:, None])

    cell = 3
    glyph_w, glyph_h = 3 * cell, 5 * cell
    clear = 15
    for r0, r1 in zip(rows[:-1], rows[1:]):
        band_top = int(r0 + clear)
        band_bot = int(r1 - clear)
        y = band_top
        while y + glyph_h <= band_bot:
            for c0, c1 in zip(cols[:-1], cols[1:]):
                x = int(c0 + 6)
                while x + glyph_w <= c1 - 6:
                    if rng.random() < 0.85:
                        bits = rng.random((5, 3)) < 0.55
                        block = np.kron(bits, np.ones((cell, cell)))
                        sl = ink[y:y + glyph_h, x:x + glyph_w]
                        np.maximum(sl, block, out=sl)
                    x += glyph_w + 3
            y += glyph_h + 8
    img = PAPER - (PAPER - INK) * ink
    return PageContent(Raster(to_uint8(img)), rows, (u0, v0, u1, v1))


def half_cosine_profile(width: int, bump: float, degree: int = 8) -> PolyCurve:
    """Polynomial fit of ``bump * sin(pi u / (W-1))`` over the page width."""
    u = np.linspace(0.0, width - 1.0, 2001)
    z = bump * np.sin(np.pi * u / (width - 1.0))
    return fit(np.c_[u, z], degree=degree, axis="x", domain=(0.0, width - 1.0))


def book_profile(width: int, bump: float, degree: int = 8) -> PolyCurve:
    """Per-page hump as a function of distance from the spine.

    ``z(d) = bump * sin(pi d / half)``: zero at the spine and at the outer
    edge, rising steeply from the spine so the outline has a V at the fold.
    """
    half = (width - 1.0) / 2.0
    d = np.linspace(0.0, half, 2001)
    z = bump * np.sin(np.pi * d / half)
    return fit(np.c_[d, z], degree=degree, axis="x", domain=(0.0, half))


@dataclass(frozen=True, eq=False)
class WarpScene:
    flat: Raster
    height_profile: PolyCurve
    distance: float = 2000.0
    tilt: float = 0.0
    seed: int = 0
    margin: int = 60
    book: bool = False
    line_rows: tuple[float, ...] = ()
    content_start: float = 0.0

    @property
    def width(self) -> int:
        return self.flat.width

    @property
    def height(self) -> int:
        return self.flat.height

    def z(self, u):
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, self.width - 1.0)
        if self.book:
            u = np.abs(u - (self.width - 1.0) / 2.0)
        return eval_poly(self.height_profile, u)

    def dz(self, u):
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, self.width - 1.0)
        if self.book:
            c = (self.width - 1.0) / 2.0
            return np.sign(u - c) * deriv(self.height_profile, np.abs(u - c), 1)
        return deriv(self.height_profile, u, 1)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    mesh: GridLattice
    image: Raster
    flat: Raster
    outline: PageOutline
    line_rows: tuple[float, ...] = field(default=())
    content_start: float = 0.0


class Camera:
    """Pinhole looking at the page centre, tilted about the world X axis."""

    def __init__(self, distance: float, tilt: float, width: int, height: int, margin: int):
        self.f = float(distance)
        c, s = math.cos(tilt), math.sin(tilt)
        self.center = np.array([0.0, -distance * s, distance * c])
        self.x_axis = np.array([1.0, 0.0, 0.0])
        self.y_axis = np.array([0.0, c, s])
        self.z_axis = np.array([0.0, s, -c])
        self.cx = margin + (width - 1.0) / 2.0
        self.cy = margin + (height - 1.0) / 2.0

    def project(self, X, Y, Z):
        d = np.stack([X - self.center[0], Y - self.center[1], Z - self.center[2]], axis=-1)
        xc = d @ self.x_axis
        yc = d @ self.y_axis
        zc = d @ self.z_axis
        if np.any(zc <= 0):
            raise InvalidCameraError("invalid camera: page point behind the camera")
        return self.f * xc / zc + self.cx, self.f * yc / zc + self.cy

    def rays(self, px, py):
        a = (px - self.cx) / self.f
        b = (py - self.cy) / self.f
        return (a[..., None] * self.x_axis + b[..., None] * self.y_axis + self.z_axis)


def _page_uv(scene: WarpScene, cam: Camera, px: np.ndarray, py: np.ndarray):
    """Flat-page coordinates hit by the rays through image pixels ``(px, py)``."""
    W, H = scene.width, scene.height
    ray = cam.rays(px, py)
    dx, dy, dz = ray[..., 0], ray[..., 1], ray[..., 2]
    cx0, cy0, cz0 = cam.center
    # start on the z = 0 plane and Newton onto the surface Z = z(X)
    t = (0.0 - cz0) / dz
    half_w = (W - 1.0) / 2.0
    for _ in range(12):
        X = cx0 + t * dx
        u = X + half_w
        phi = cz0 + t * dz - scene.z(u)
        dphi = dz - scene.dz(u) * dx
        t = t - phi / dphi
    X = cx0 + t * dx
    Y = cy0 + t * dy
    u = X + half_w
    v = Y + (H - 1.0) / 2.0
    resid = np.abs(cz0 + t * dz - scene.z(u))
    if np.any(resid[(u >= 0) & (u <= W - 1) & (v >= 0) & (v <= H - 1)] > 1e-3):
        raise InvalidCameraError("invalid camera: ray/surface intersection did not converge")
    return u, v


def _validate_scene(scene: WarpScene):
    u = np.linspace(0.0, scene.width - 1.0, 512)
    z = scene.z(u)
    if not np.all(np.isfinite(z)):
        raise ValueError("height profile is not finite over the page")
    if scene.distance <= z.max():
        raise InvalidCameraError("invalid camera: distance must exceed the page height")


def render(scene: WarpScene, spec: GridSpec = GridSpec()) -> GroundTruth:
    """Photograph the scene and project the uniform ``M x N`` page grid."""
    _validate_scene(scene)
    W, H, m = scene.width, scene.height, scene.margin
    cam = Camera(scene.distance, scene.tilt, W, H, m)

    us = np.linspace(0.0, W - 1.0, spec.M)
    vs = np.linspace(0.0, H - 1.0, spec.N)
    U, V = np.meshgrid(us, vs)
    mx, my = cam.project(U - (W - 1.0) / 2.0, V - (H - 1.0) / 2.0, scene.z(U))
    mesh = GridLattice(np.stack([mx, my], axis=-1).reshape(-1, 2), spec)

    def proj(u, v):
        x, y = cam.project(np.array(u - (W - 1.0) / 2.0), np.array(v - (H - 1.0) / 2.0), scene.z(np.array(u)))
        return np.array([float(x), float(y)])

    corners = np.array([proj(0, 0), proj(W - 1, 0), proj(W - 1, H - 1), proj(0, H - 1)])
    if scene.book:
        c = (W - 1.0) / 2.0
        outline = PageOutline(corners, proj(c, 0), proj(c, H - 1))
    else:
        outline = PageOutline(corners)

    py, px = np.mgrid[0:H + 2 * m, 0:W + 2 * m].astype(np.float64)
    u, v = _page_uv(scene, cam, px, py)
    inside = (u >= -0.5) & (u <= W - 0.5) & (v >= -0.5) & (v <= H - 0.5)
    vals = sample_bilinear(scene.flat, u, v)
    if scene.flat.channels == 3:
        inside = inside[..., None]
    img = np.where(inside, vals, BACKGROUND)
    return GroundTruth(mesh, Raster(to_uint8(img)), scene.flat, outline, scene.line_rows, scene.content_start)


# --------------------------------------------------------------------------
# Scene files
# --------------------------------------------------------------------------

DEFAULT_SCENE = {
    "profile": "half_cosine",
    "bump": 120.0,
    "distance": 2000.0,
    "tilt": 0.0,
    "seed": 7,
    "width": 1000,
    "height": 1400,
    "margin": 60,
    "grid": [30, 30],
}

# Two-page spread whose pages leave the gutter at roughly 50 degrees, enough
# for the fold to turn the outline by more than the default kink angle.
BOOK_SCENE = {
    **DEFAULT_SCENE,
    "profile": "book",
    "bump": 260.0,
    "width": 1400,
    "height": 1000,
}


def scene_from_dict(d: dict) -> tuple[WarpScene, GridSpec]:
    """Build a scene from its JSON form.

    ``profile_coeffs`` gives the height polynomial directly (ascending, in
    pixels); otherwise ``profile`` names a generator (``half_cosine``,
    ``book`` or ``flat``) scaled by ``bump``.
    """
    d = {**DEFAULT_SCENE, **d}
    width, height = int(d["width"]), int(d["height"])
    book = d.get("profile") == "book" or bool(d.get("book", False))
    if "profile_coeffs" in d:
        dom_hi = (width - 1.0) / 2.0 if book else width - 1.0
        profile = PolyCurve(d["profile_coeffs"], "x", (0.0, dom_hi))
    elif d["profile"] == "half_cosine":
        profile = half_cosine_profile(width, float(d["bump"]))
    elif d["profile"] == "book":
        profile = book_profile(width, float(d["bump"]))
    elif d["profile"] == "flat":
        profile = PolyCurve([0.0, 0.0, 0.0], "x", (0.0, width - 1.0))
    else:
        raise ValueError(f"unknown profile {d['profile']!r}")
    content = page_content(width, height, int(d["seed"]))
    scene = WarpScene(content.raster, profile, float(d["distance"]), float(d["tilt"]), int(d["seed"]),
                      int(d["margin"]), book, content.line_rows, float(content.content_box[0]))
    M, N = d["grid"]
    return scene, GridSpec(int(M), int(N))


def load_scene(path) -> tuple[WarpScene, GridSpec]:
    with open(path) as fh:
        d = json.load(fh)
    if not isinstance(d, dict):
        raise ValueError("scene file must hold a JSON object")
    return scene_from_dict(d)


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------

def _gray(img: Raster) -> np.ndarray:
    if img.channels == 3:
        img = to_grayscale(img)
    return img.data.astype(np.float64)


def ssim(a: Raster, b: Raster, window: int = 8) -> float:
    """Mean structural similarity over sliding ``window x window`` boxes."""
    x, y = _gray(a), _gray(b)
    if x.shape != y.shape:
        raise ValueError("ssim needs equal image sizes")
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    f = lambda im: ndimage.uniform_filter(im, size=window, mode="reflect")
    mx, my = f(x), f(y)
    sxx = f(x * x) - mx * mx
    syy = f(y * y) - my * my
    sxy = f(x * y) - mx * my
    s = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))
    h = window // 2
    return float(s[h:-h, h:-h].mean()) if min(s.shape) > window else float(s.mean())


def span_positions(count: int, span: float) -> np.ndarray:
    """Page positions of ``count`` output pixels spanning ``span`` page pixels.

    Flattened output of ``R`` columns covers the page span ``W - 1`` with pixel
    ``r`` at page position ``r (W-1) / R``.
    """
    return np.arange(count) * (span / count)


def reference_on_grid(flat: Raster, width: int, height: int) -> Raster:
    """Resample the flat page onto a ``width x height`` flattened-output grid."""
    if (flat.width, flat.height) == (width, height):
        return flat
    uu, vv = np.meshgrid(span_positions(width, flat.width - 1.0), span_positions(height, flat.height - 1.0))
    return Raster(to_uint8(sample_bilinear(flat, uu, vv)))


def line_straightness(img: Raster, line_rows, u_start: float = 0.0, search: int = 4) -> float:
    """Worst deviation of a traced horizontal rule from its least-squares line.

    Each rule is followed column by column from ``u_start``, starting at its
    nominal row; the ink-weighted centroid inside ``+-search`` px of the
    previous position becomes the next sample.  Columns crossed by a vertical
    stroke (ink just beyond the window, or more than ``search + 1`` inked rows)
    and blank columns are skipped.
    """
    g = _gray(img)
    h, w = g.shape
    dark = np.clip((PAPER - g) / (PAPER - INK), 0.0, 1.0)
    dark[dark < 0.5] = 0.0
    worst = 0.0
    offs = np.arange(-search, search + 1)
    for r in line_rows:
        col0 = int(round(u_start))
        # lock on: strongest ink row near the nominal position
        lo, hi = int(max(r - 3 * search, 0)), int(min(r + 3 * search, h - 1))
        prof = dark[lo:hi + 1, col0:col0 + 5].sum(axis=1)
        if prof.max() <= 0:
            continue
        y = lo + float(np.argmax(prof))
        xs, ys = [], []
        for col in range(col0, w):
            yi = int(round(y))
            rows = np.clip(yi + offs, 0, h - 1)
            wts = dark[rows, col]
            probe = dark[[max(yi - search - 3, 0), min(yi + search + 3, h - 1)], col]
            if wts.sum() <= 0 or np.count_nonzero(wts) > search + 1 or probe.any():
                continue
            y = float((rows * wts).sum() / wts.sum())
            xs.append(col)
            ys.append(y)
        if len(xs) < 10:
            continue
        xs, ys = np.asarray(xs, dtype=np.float64), np.asarray(ys)
        a, b = np.polyfit(xs, ys, 1)
        worst = max(worst, float(np.abs(ys - (a * xs + b)).max()))
    return worst


def score(result: Raster, truth: GroundTruth, recovered_mesh: GridLattice | None = None) -> dict:
    """SSIM and rule straightness against the flat page, plus mesh RMSE.

    When the result's size differs from the flat page, the flat page is
    resampled onto the result's pixel grid (see :func:`span_positions`), and
    rule rows are mapped the same way, so interpolation of the reference
    matches that of the result and only geometric error remains.
    """
    flat = truth.flat
    ref = reference_on_grid(flat, result.width, result.height)
    if (ref.width, ref.height) != (result.width, result.height):
        raise ValueError("dimension mismatch after resampling")
    sx = result.width / (flat.width - 1.0) if result.width != flat.width else 1.0
    sy = result.height / (flat.height - 1.0) if result.height != flat.height else 1.0
    out = {"ssim": ssim(result, ref)}
    rows = [r * sy for r in truth.line_rows]
    out["line_straightness"] = (line_straightness(result, rows, u_start=truth.content_start * sx)
                                if rows else 0.0)
    if recovered_mesh is not None:
        if recovered_mesh.points.shape != truth.mesh.points.shape:
            raise ValueError("recovered mesh and ground truth differ in size")
        d = recovered_mesh.points - truth.mesh.points
        out["mesh_rmse"] = float(np.sqrt(np.mean((d ** 2).sum(axis=1))))
    return out


# --------------------------------------------------------------------------
# Ground-truth bundles on disk
# --------------------------------------------------------------------------

def _dump(obj, path):
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def save_bundle(truth: GroundTruth, directory) -> Path:
    """Write image.png, flat.png, mesh.json and truth.json under ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_image(truth.image, out / "image.png")
    write_image(truth.flat, out / "flat.png")
    _dump(truth.mesh.to_json(), out / "mesh.json")
    _dump({"landmarks": truth.outline.to_json(), "line_rows": list(truth.line_rows),
           "content_start": truth.content_start}, out / "truth.json")
    return out


def load_bundle(directory) -> GroundTruth:
    src = Path(directory)
    meta = json.loads((src / "truth.json").read_text())
    mesh = GridLattice.from_json(json.loads((src / "mesh.json").read_text()))
    return GroundTruth(mesh, read_image(src / "image.png"), read_image(src / "flat.png"),
                       PageOutline.from_json(meta["landmarks"]), tuple(meta["line_rows"]),
                       float(meta["content_start"]))
