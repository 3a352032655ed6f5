"""Page outline extraction: border following, quadrilateral fit, spine kinks.

Contours are ``(n, 2)`` arrays of ``(x, y)`` points.  Traced contours hold
integer pixel coordinates; once mapped through the global rectification they
become real-valued, and every function here accepts either.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import LandmarkError, NoQuadrilateralError
from .raster import BinaryMask

# Neighbour offsets (drow, dcol) in clockwise order on screen, starting east.
_NEIGHBOURS = ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1))
_DIRECTION = {d: k for k, d in enumerate(_NEIGHBOURS)}


@dataclass(frozen=True, eq=False)
class Contour:
    points: np.ndarray
    closed: bool = True

    def __post_init__(self):
        pts = np.asarray(self.points)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("contour points must have shape (n, 2)")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @property
    def area(self) -> float:
        return abs(signed_area(self.points))


@dataclass(frozen=True, eq=False)
class PageOutline:
    """Corners ordered TL, TR, BR, BL plus the optional spine landmarks."""

    corners: np.ndarray
    spine_top: np.ndarray | None = None
    spine_bottom: np.ndarray | None = None

    def __post_init__(self):
        corners = np.asarray(self.corners, dtype=np.float64).reshape(4, 2)
        object.__setattr__(self, "corners", corners)
        if (self.spine_top is None) != (self.spine_bottom is None):
            raise ValueError("spine landmarks come in pairs")
        if self.spine_top is not None:
            object.__setattr__(self, "spine_top", np.asarray(self.spine_top, dtype=np.float64))
            object.__setattr__(self, "spine_bottom", np.asarray(self.spine_bottom, dtype=np.float64))

    @property
    def is_book(self) -> bool:
        return self.spine_top is not None

    def to_json(self) -> dict:
        out = {"corners": self.corners.tolist(), "spine": []}
        if self.is_book:
            out["spine"] = [self.spine_top.tolist(), self.spine_bottom.tolist()]
        return out

    @classmethod
    def from_json(cls, d: dict) -> "PageOutline":
        spine = d.get("spine") or [None, None]
        return cls(np.asarray(d["corners"], dtype=np.float64), *spine)


@dataclass(frozen=True, eq=False)
class SurfaceBoundary:
    """Four boundary chains of one smooth surface.

    ``top`` and ``bottom`` run left to right, ``left`` and ``right`` run top to
    bottom, so ``top[0] == left[0]``, ``top[-1] == right[0]``,
    ``bottom[0] == left[-1]`` and ``bottom[-1] == right[-1]``.
    """

    top: np.ndarray
    bottom: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def chains(self) -> dict[str, np.ndarray]:
        return {"top": self.top, "bottom": self.bottom, "left": self.left, "right": self.right}

    @property
    def corners(self) -> np.ndarray:
        """TL, TR, BR, BL of this surface."""
        return np.array([self.top[0], self.top[-1], self.bottom[-1], self.bottom[0]], dtype=np.float64)


def signed_area(points) -> float:
    p = np.asarray(points, dtype=np.float64)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


# --------------------------------------------------------------------------
# Border following
# --------------------------------------------------------------------------

def _follow_outer(img: np.ndarray, r: int, c: int) -> list[tuple[int, int]]:
    """Suzuki-Abe outer border following from start pixel ``(r, c)``.

    ``img`` is zero-padded so neighbour lookups never leave the array, and the
    pixel west of the start is background.
    """
    start = (r, c)
    west = _DIRECTION[(0, -1)]
    first = None
    for step in range(8):
        dr, dc = _NEIGHBOURS[(west - step) % 8]
        if img[r + dr, c + dc]:
            first = (r + dr, c + dc)
            break
    if first is None:
        return [start]

    prev, cur = first, start
    out = []
    while True:
        d_prev = _DIRECTION[(prev[0] - cur[0], prev[1] - cur[1])]
        nxt = None
        for step in range(1, 9):
            dr, dc = _NEIGHBOURS[(d_prev + step) % 8]
            if img[cur[0] + dr, cur[1] + dc]:
                nxt = (cur[0] + dr, cur[1] + dc)
                break
        out.append(cur)
        if nxt == start and cur == first:
            break
        prev, cur = cur, nxt
    return out


def trace_borders(mask: BinaryMask | np.ndarray) -> list[Contour]:
    """Outer borders of all 8-connected foreground components.

    Sorted by enclosed (shoelace) area, largest first; ties keep raster order
    of the components' first pixels.
    """
    bits = mask.bits if isinstance(mask, BinaryMask) else np.asarray(mask, dtype=bool)
    if bits.size == 0:
        raise ValueError("mask is empty")
    labels, count = ndimage.label(bits, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return []
    flat = labels.ravel()
    fg = np.flatnonzero(flat)
    _, first = np.unique(flat[fg], return_index=True)
    starts = fg[first]

    padded = np.pad(bits, 1).view(np.uint8)
    w = bits.shape[1]
    contours = []
    for s in starts:
        r, c = divmod(int(s), w)
        path = _follow_outer(padded, r + 1, c + 1)
        pts = np.array([(cc - 1, rr - 1) for rr, cc in path], dtype=np.int64)
        contours.append(Contour(pts, closed=True))
    contours.sort(key=lambda ct: -ct.area)
    return contours


# --------------------------------------------------------------------------
# Quadrilateral outline
# --------------------------------------------------------------------------

def _point_line_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    norm = math.hypot(ab[0], ab[1])
    if norm == 0.0:
        return np.hypot(pts[:, 0] - a[0], pts[:, 1] - a[1])
    return np.abs(ab[0] * (pts[:, 1] - a[1]) - ab[1] * (pts[:, 0] - a[0])) / norm


def douglas_peucker(points: np.ndarray, epsilon: float) -> list[int]:
    """Indices of the vertices kept when simplifying an open polyline."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n <= 2:
        return list(range(n))
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        d = _point_line_distance(pts[lo + 1:hi], pts[lo], pts[hi])
        idx = int(np.argmax(d))
        if d[idx] > epsilon:
            mid = lo + 1 + idx
            keep[mid] = True
            stack.append((lo, mid))
            stack.append((mid, hi))
    return list(np.flatnonzero(keep))


def _simplify_closed(pts: np.ndarray, epsilon: float) -> list[int]:
    centroid = pts.mean(axis=0)
    a = int(np.argmax(np.hypot(*(pts - centroid).T)))
    ring = np.roll(pts, -a, axis=0)
    b = int(np.argmax(np.hypot(*(ring - ring[0]).T)))
    if b == 0:
        return [a]
    first = douglas_peucker(ring[: b + 1], epsilon)
    second = douglas_peucker(np.vstack([ring[b:], ring[:1]]), epsilon)
    idx = first[:-1] + [b + i for i in second[:-1]]
    # the anchors themselves may sit on a straight edge; drop them if so
    changed = True
    while changed and len(idx) > 3:
        changed = False
        for k in range(len(idx)):
            p, q, r = ring[idx[k - 1]], ring[idx[k]], ring[idx[(k + 1) % len(idx)]]
            if _point_line_distance(q[None, :], p, r)[0] <= epsilon:
                del idx[k]
                changed = True
                break
    return [(i + a) % len(pts) for i in idx]


def order_corners(quad) -> np.ndarray:
    """Order four points TL, TR, BR, BL (clockwise on screen, y down)."""
    q = np.asarray(quad, dtype=np.float64).reshape(4, 2)
    c = q.mean(axis=0)
    ang = np.arctan2(q[:, 1] - c[1], q[:, 0] - c[0])
    q = q[np.argsort(ang, kind="stable")]
    tl = int(np.argmin(q[:, 0] + q[:, 1]))
    return np.roll(q, -tl, axis=0)


def approx_quadrilateral(c: Contour | np.ndarray, return_indices: bool = False):
    """Four-vertex Douglas-Peucker outline with a ramped tolerance.

    The tolerance starts at half a pixel and grows geometrically until the
    simplified polygon has exactly four vertices.  Returns corners ordered
    TL, TR, BR, BL (and their contour indices when requested).
    """
    pts = np.asarray(c.points if isinstance(c, Contour) else c, dtype=np.float64)
    if len(pts) < 4:
        raise NoQuadrilateralError("no quadrilateral outline")
    span = float(np.ptp(pts, axis=0).max())
    eps = 0.5
    while eps <= span:
        idx = _simplify_closed(pts, eps)
        if len(idx) == 4:
            quad = pts[idx]
            if abs(signed_area(order_corners(quad))) > 0:
                ordered = order_corners(quad)
                if return_indices:
                    order = [int(np.flatnonzero((quad == p).all(axis=1))[0]) for p in ordered]
                    return ordered, [idx[o] for o in order]
                return ordered
        if len(idx) < 4:
            break
        eps *= 1.08
    raise NoQuadrilateralError("no quadrilateral outline")


# --------------------------------------------------------------------------
# Non-differentiable points
# --------------------------------------------------------------------------

def turning_angles(points: np.ndarray, window: int, indices, closed: bool = True) -> np.ndarray:
    """Unsigned turning angle at each index between ``window``-long segments."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    idx = np.asarray(indices, dtype=np.intp)
    if closed:
        before, after = pts[(idx - window) % n], pts[(idx + window) % n]
    else:
        before, after = pts[np.clip(idx - window, 0, n - 1)], pts[np.clip(idx + window, 0, n - 1)]
    here = pts[idx % n]
    vin = here - before
    vout = after - here
    cross = vin[:, 0] * vout[:, 1] - vin[:, 1] * vout[:, 0]
    dot = (vin * vout).sum(axis=1)
    return np.abs(np.arctan2(cross, dot))


def find_kinks(
    c: Contour | np.ndarray,
    window: int = 5,
    threshold: float = math.radians(30.0),
    roi: tuple[int, int] | None = None,
    closed: bool | None = None,
) -> list[int]:
    """Indices where the contour turns by more than ``threshold`` radians.

    ``roi`` is a ``(start, stop)`` index range; on a closed contour it may wrap
    past the end (``start > stop``).  Detections closer than ``window`` indices
    are merged into the one with the largest angle.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if isinstance(c, Contour):
        pts, is_closed = c.points, c.closed
    else:
        pts, is_closed = np.asarray(c), True
    if closed is not None:
        is_closed = closed
    n = len(pts)
    if n < 3:
        return []
    full = roi is None
    if full:
        order = np.arange(n) if is_closed else np.arange(window, n - window)
    else:
        start, stop = roi
        if not (0 <= start <= n and 0 <= stop <= n):
            raise ValueError("roi outside contour")
        if is_closed:
            length = (stop - start) % n or n
            order = (start + np.arange(length)) % n
        else:
            order = np.arange(max(start, window), min(stop, n - window))
    if len(order) == 0:
        return []
    ang = turning_angles(pts, window, order, closed=is_closed)
    hits = np.flatnonzero(ang > threshold)
    if len(hits) == 0:
        return []

    groups = [[hits[0]]]
    for h in hits[1:]:
        if h - groups[-1][-1] <= window:
            groups[-1].append(h)
        else:
            groups.append([h])
    if full and is_closed and len(groups) > 1 and (groups[0][0] + n - groups[-1][-1]) <= window:
        groups[0] = groups.pop() + groups[0]
    result = []
    for g in groups:
        g = np.asarray(g)
        best = g[int(np.argmax(ang[g]))]
        result.append(int(order[best]))
    return sorted(result)


def nearest_index(points: np.ndarray, p) -> tuple[int, float]:
    d = np.hypot(points[:, 0] - p[0], points[:, 1] - p[1])
    i = int(np.argmin(d))
    return i, float(d[i])


def _chain(points: np.ndarray, a: int, b: int, step: int) -> np.ndarray:
    n = len(points)
    count = ((b - a) * step) % n + 1
    return points[(a + step * np.arange(count)) % n]


def _straight_chain(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    count = max(int(math.ceil(math.hypot(*(b - a)))), 1) + 1
    t = np.linspace(0.0, 1.0, count)[:, None]
    chain = a[None, :] * (1.0 - t) + b[None, :] * t
    chain[0], chain[-1] = a, b
    return chain


def split_surfaces(c: Contour | np.ndarray, outline: PageOutline, tolerance: float = 2.0):
    """Cut the contour at the outline landmarks into boundary chains.

    Book mode returns ``(left, right)`` surfaces sharing a straight spine chain
    between the two spine points; single-page mode returns a 1-tuple.
    Landmarks are snapped to their nearest contour point, and a landmark more
    than ``tolerance`` pixels from the contour is rejected.
    """
    pts = np.asarray(c.points if isinstance(c, Contour) else c, dtype=np.float64)
    n = len(pts)
    landmarks = list(outline.corners)
    if outline.is_book:
        landmarks += [outline.spine_top, outline.spine_bottom]
    idx = []
    for p in landmarks:
        i, dist = nearest_index(pts, p)
        if dist > tolerance:
            raise LandmarkError(f"landmark off contour: ({p[0]:.1f}, {p[1]:.1f}) is {dist:.1f} px away")
        idx.append(i)
    tl, tr, br, bl = idx[:4]

    # walk direction that visits TL -> TR -> BR -> BL in cyclic order
    def cyclic_increasing(seq, step):
        offs = [((s - seq[0]) * step) % n for s in seq]
        return all(x < y for x, y in zip(offs, offs[1:]))

    step = 1 if cyclic_increasing([tl, tr, br, bl], 1) else -1
    if not cyclic_increasing([tl, tr, br, bl], step):
        raise LandmarkError("landmark off contour: corners out of cyclic order")
    snapped = pts[idx]

    if not outline.is_book:
        top = _chain(pts, tl, tr, step)
        right = _chain(pts, tr, br, step)
        bottom = _chain(pts, br, bl, step)[::-1]
        left = _chain(pts, bl, tl, step)[::-1]
        return (SurfaceBoundary(top, bottom, left, right),)

    st, sb = idx[4], idx[5]
    if not cyclic_increasing([tl, st, tr], step) or not cyclic_increasing([br, sb, bl], step):
        raise LandmarkError("landmark off contour: spine points not on the top/bottom arcs")
    spine = _straight_chain(snapped[4], snapped[5])
    left = SurfaceBoundary(
        top=_chain(pts, tl, st, step),
        bottom=_chain(pts, sb, bl, step)[::-1],
        left=_chain(pts, bl, tl, step)[::-1],
        right=spine,
    )
    right = SurfaceBoundary(
        top=_chain(pts, st, tr, step),
        bottom=_chain(pts, br, sb, step)[::-1],
        left=spine,
        right=_chain(pts, tr, br, step),
    )
    return left, right


def arc_indices(n: int, a: int, b: int, step: int) -> np.ndarray:
    count = ((b - a) * step) % n + 1
    return (a + step * np.arange(count)) % n


def detect_spine(
    points: np.ndarray,
    corner_idx: list[int],
    window: int = 5,
    threshold: float = math.radians(30.0),
):
    """Locate the spine top/bottom kinks on the top and bottom arcs.

    The search is confined to each arc with ``3 * window`` points trimmed at
    both ends so the page corners never register.  When an arc yields several
    kinks, the one nearest the outline's vertical centre line wins.  Returns
    ``(spine_top_index, spine_bottom_index)``; either is ``None`` if absent.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    tl, tr, br, bl = corner_idx
    step = 1 if ((tr - tl) % n) < ((bl - tl) % n) else -1
    centre_x = pts[corner_idx, 0].mean()
    trim = 3 * window
    found = []
    for a, b in ((tl, tr), (br, bl)):
        arc = arc_indices(n, a, b, step)
        if len(arc) <= 2 * trim:
            found.append(None)
            continue
        inner = arc[trim:-trim]
        ang = turning_angles(pts, window, inner)
        hits = np.flatnonzero(ang > threshold)
        if len(hits) == 0:
            found.append(None)
            continue
        groups = [[hits[0]]]
        for h in hits[1:]:
            if h - groups[-1][-1] <= window:
                groups[-1].append(h)
            else:
                groups.append([h])
        cands = [int(inner[g[int(np.argmax(ang[g]))]]) for g in map(np.asarray, groups)]
        found.append(min(cands, key=lambda i: abs(pts[i, 0] - centre_x)))
    return found[0], found[1]
