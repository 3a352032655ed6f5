"""Brute-force reference implementations used by several test modules."""

import numpy as np
from scipy import ndimage

EIGHT = np.ones((3, 3), dtype=int)
FOUR = ndimage.generate_binary_structure(2, 1)


def outer_border_sets(mask: np.ndarray) -> list[set[tuple[int, int]]]:
    """Outer border pixels ``(x, y)`` of every 8-connected component.

    A pixel is on the outer border when it is 4-adjacent to the 4-connected
    background region surrounding its component.  That region is the one
    containing the pixel directly above the component's raster-first pixel
    (padding guarantees it exists).
    """
    bits = np.pad(np.asarray(mask, dtype=bool), 1)
    fg, count = ndimage.label(bits, structure=EIGHT)
    bg, _ = ndimage.label(~bits, structure=FOUR)
    out = []
    for lab in range(1, count + 1):
        ys, xs = np.nonzero(fg == lab)
        first = np.lexsort((xs, ys))[0]
        outside = bg[ys[first] - 1, xs[first]]
        region = bg == outside
        touch = np.zeros_like(region)
        touch[1:, :] |= region[:-1, :]
        touch[:-1, :] |= region[1:, :]
        touch[:, 1:] |= region[:, :-1]
        touch[:, :-1] |= region[:, 1:]
        by, bx = np.nonzero(touch & (fg == lab))
        out.append({(int(x) - 1, int(y) - 1) for x, y in zip(bx, by)})
    return out


def is_closed_8_path(points: np.ndarray) -> bool:
    p = np.asarray(points)
    if len(p) == 1:
        return True
    step = np.abs(np.diff(np.vstack([p, p[:1]]), axis=0))
    return bool(np.all(step.max(axis=1) == 1))


def numeric_curvature(f, x, h=1e-4):
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)
    return d2 / (1 + d1 * d1) ** 1.5


def book_mask(width=301, height=201, margin=20, depth=40, half=40) -> np.ndarray:
    """Left/right-symmetric two-page outline with a V notch top and bottom."""
    H, W = height + 2 * margin, width + 2 * margin
    yy, xx = np.mgrid[0:H, 0:W]
    c = margin + (width - 1) // 2
    dip = depth * np.clip(1 - np.abs(xx - c) / half, 0, None)
    inside = (xx >= margin) & (xx < margin + width)
    inside &= (yy >= margin + dip) & (yy <= margin + height - 1 - dip)
    return inside
