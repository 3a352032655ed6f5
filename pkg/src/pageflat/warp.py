"""Four-point homographies, per-block inverse warping and tile recombination."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCorrespondenceError, NoHomographyError, TileMismatchError
from .mesh import QuadBlock
from .raster import CLAMP, Raster, sample_bilinear, to_uint8


@dataclass(frozen=True, eq=False)
class Homography:
    """3x3 projective map, normalized so ``h9 == 1`` where possible."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64).reshape(3, 3).copy()
        if abs(m[2, 2]) > 1e-12:
            m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= 1e-12:
            raise NoHomographyError("no homography: singular matrix")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def h(self) -> np.ndarray:
        return self.matrix.ravel()

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        m = self.matrix
        x, y = p[..., 0], p[..., 1]
        t = m[2, 0] * x + m[2, 1] * y + m[2, 2]
        return np.stack([(m[0, 0] * x + m[0, 1] * y + m[0, 2]) / t,
                         (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / t], axis=-1)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def __matmul__(self, other: "Homography") -> "Homography":
        return Homography(self.matrix @ other.matrix)


@dataclass(frozen=True)
class TileLayout:
    cell_w: int
    cell_h: int
    cols: int
    rows: int

    def __post_init__(self):
        if min(self.cell_w, self.cell_h, self.cols, self.rows) < 1:
            raise ValueError("tile layout dimensions must be positive")

    @property
    def M(self) -> int:
        return self.cols + 1

    @property
    def size(self) -> tuple[int, int]:
        """Output canvas as ``(width, height)``."""
        return self.cols * self.cell_w, self.rows * self.cell_h

    @classmethod
    def for_page(cls, width: float, height: float, M: int, N: int) -> "TileLayout":
        return cls(max(1, round(width / (M - 1))), max(1, round(height / (N - 1))), M - 1, N - 1)


def gauss_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting for a small dense system."""
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    n = len(b)
    scale = np.abs(a).max()
    for col in range(n):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[piv, col]) <= 1e-12 * scale:
            raise NoHomographyError("no homography: singular system")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
        f = a[col + 1:, col] / a[col, col]
        a[col + 1:, col:] -= f[:, None] * a[col, col:]
        b[col + 1:] -= f * b[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1:] @ x[row + 1:]) / a[row, row]
    return x


def _check_quad(pts: np.ndarray, name: str):
    span = max(float(np.ptp(pts, axis=0).max()), 1e-300)
    for i in range(4):
        a, b, c = (pts[(i + k) % 4] for k in range(3))
        area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(area2) <= 1e-9 * span * span:
            raise DegenerateCorrespondenceError(f"degenerate correspondence: three {name} points are collinear")


def _normalizer(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    d = np.hypot(*(pts - c).T).mean()
    s = math.sqrt(2.0) / d
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])


def solve_homography(src, dst) -> Homography:
    """Homography mapping the four ``src`` points onto ``dst``.

    Each correspondence contributes the two rows obtained by eliminating the
    projective scale ``t = h7 x + h8 y + h9`` with ``h9 = 1``.  Points are
    similarity-normalized first for conditioning.
    """
    src = np.asarray(src, dtype=np.float64).reshape(4, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(4, 2)
    _check_quad(src, "source")
    _check_quad(dst, "target")
    ts, td = _normalizer(src), _normalizer(dst)
    s = (np.c_[src, np.ones(4)] @ ts.T)[:, :2]
    d = (np.c_[dst, np.ones(4)] @ td.T)[:, :2]
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(s, d)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -x * u, -y * u]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -x * v, -y * v]
        b[2 * i], b[2 * i + 1] = u, v
    h = np.append(gauss_solve(a, b), 1.0).reshape(3, 3)
    return Homography(np.linalg.inv(td) @ h @ ts)


def tile_corners(layout: TileLayout) -> np.ndarray:
    """Tile rectangle corners in block order: TL, TR, BL, BR."""
    w, h = layout.cell_w, layout.cell_h
    return np.array([[0, 0], [w, 0], [0, h], [w, h]], dtype=np.float64)


def _tile_grid(layout: TileLayout) -> np.ndarray:
    a, b = np.meshgrid(np.arange(layout.cell_w, dtype=np.float64),
                       np.arange(layout.cell_h, dtype=np.float64))
    return np.stack([a, b, np.ones_like(a)], axis=-1)


def _warp_chunk(img: Raster, blocks, layout: TileLayout, policy: str) -> list[np.ndarray]:
    # Each tile pixel depends only on its own block homography, so chunking
    # never changes the result.
    rect = tile_corners(layout)
    hs = np.stack([solve_homography(rect, blk.corners).matrix for blk in blocks])
    q = np.einsum("kij,hwj->khwi", hs, _tile_grid(layout))
    src = q[..., :2] / q[..., 2:3]
    vals = to_uint8(sample_bilinear(img, src[..., 0], src[..., 1], policy=policy))
    return list(vals)


def warp_block(img: Raster, block: QuadBlock, layout: TileLayout, policy: str = CLAMP) -> Raster:
    """Pull a ``cell_w x cell_h`` tile out of the quadrilateral ``block``.

    Tile pixel ``(a, b)`` sits at tile coordinate ``(a, b)``; the homography
    taking the tile rectangle onto the block corners maps it into the source,
    which is sampled bilinearly.
    """
    return Raster(_warp_chunk(img, [block], layout, policy)[0])


def warp_blocks(img: Raster, blocks, layout: TileLayout, jobs: int = 1, policy: str = CLAMP,
                chunk: int = 64) -> dict[int, Raster]:
    """Warp every block, ``chunk`` blocks per vectorized batch.

    With ``jobs > 1`` the batches run on a thread pool.
    """
    blocks = list(blocks)
    groups = [blocks[i:i + chunk] for i in range(0, len(blocks), chunk)]
    if jobs <= 1 or len(groups) <= 1:
        parts = [_warp_chunk(img, g, layout, policy) for g in groups]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda g: _warp_chunk(img, g, layout, policy), groups))
    return {blk.k: Raster(t) for g, p in zip(groups, parts) for blk, t in zip(g, p)}


def recombine(tiles: dict[int, Raster], layout: TileLayout) -> Raster:
    """Place tile ``k`` at column ``k mod M`` and row ``k // M``.

    Lattice rows are stored top to bottom, so block rows map onto output rows
    without a flip.
    """
    M = layout.M
    expected = [j * M + i for j in range(layout.rows) for i in range(layout.cols)]
    channels = None
    for k in expected:
        if k not in tiles:
            raise TileMismatchError(k, "missing")
        t = tiles[k]
        if (t.width, t.height) != (layout.cell_w, layout.cell_h):
            raise TileMismatchError(k, f"expected {layout.cell_w}x{layout.cell_h}, got {t.width}x{t.height}")
        if channels is None:
            channels = t.channels
        elif t.channels != channels:
            raise TileMismatchError(k, "channel count differs")
    extra = set(tiles) - set(expected)
    if extra:
        raise TileMismatchError(min(extra), "not an admissible block index")
    w, h = layout.size
    shape = (h, w) if channels == 1 else (h, w, 3)
    out = np.zeros(shape, dtype=np.uint8)
    cw, ch = layout.cell_w, layout.cell_h
    for k in expected:
        i, j = k % M, k // M
        out[j * ch:(j + 1) * ch, i * cw:(i + 1) * cw] = tiles[k].data
    return Raster(out)


def global_homography(corners, out_w: int, out_h: int, pad: tuple[int, int] = (0, 0)) -> Homography:
    """Map TL, TR, BR, BL ``corners`` onto the output rectangle.

    The rectangle's corner pixel centers land on ``(pad_x, pad_y)`` and
    ``(pad_x + out_w - 1, pad_y + out_h - 1)``.
    """
    px, py = pad
    rect = np.array([[px, py], [px + out_w - 1, py], [px + out_w - 1, py + out_h - 1], [px, py + out_h - 1]],
                    dtype=np.float64)
    return solve_homography(corners, rect)


def warp_full(img: Raster, to_source: Homography, width: int, height: int, policy: str = CLAMP) -> Raster:
    """Inverse-warp a whole canvas: output pixel ``q`` samples ``to_source(q)``."""
    a, b = np.meshgrid(np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64))
    src = to_source.apply(np.stack([a, b], axis=-1))
    return Raster(to_uint8(sample_bilinear(img, src[..., 0], src[..., 1], policy=policy)))


def rectify_global(img: Raster, corners, out_w: int, out_h: int, pad: tuple[int, int] = (0, 0),
                   policy: str = CLAMP) -> Raster:
    """Warp the quadrilateral page outline onto an ``out_w x out_h`` rectangle.

    With a nonzero ``pad`` the canvas grows by ``2 * pad`` so content bulging
    past the corner-to-corner rectangle is kept.
    """
    fwd = global_homography(corners, out_w, out_h, pad)
    return warp_full(img, fwd.inverse(), out_w + 2 * pad[0], out_h + 2 * pad[1], policy)


def concat_horizontal(images: list[Raster]) -> Raster:
    if len(images) == 1:
        return images[0]
    h = max(im.height for im in images)
    parts = []
    for im in images:
        d = im.data
        if im.height < h:
            fill = np.repeat(d[-1:], h - im.height, axis=0)
            d = np.concatenate([d, fill], axis=0)
        parts.append(d)
    return Raster(np.concatenate(parts, axis=1))
