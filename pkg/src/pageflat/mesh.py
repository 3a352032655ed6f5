"""Curvature-driven grid spacing, lattice intersection and block extraction.

Lattice convention: ``M`` columns by ``N`` rows, row-major, row 0 at the top
of the image, so ``p[k]`` with ``k = j * M + i`` sits in column ``i`` of row
``j``.  Block ``k`` has corners ``(p[k], p[k+1], p[k+M], p[k+M+1])``, i.e.
top-left, top-right, bottom-left, bottom-right on screen.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import MeshFoldError
from .polyfit import CurveFamily, PolyCurve, curvature

log = logging.getLogger(__name__)

EPSILON = 1e-6
GAMMA_CLAMP = (0.1, 10.0)


@dataclass(frozen=True)
class GridSpec:
    M: int = 30
    N: int = 30

    def __post_init__(self):
        if self.M < 2 or self.N < 2:
            raise ValueError("grid needs M >= 2 and N >= 2")


@dataclass(frozen=True, eq=False)
class ScaleSeries:
    """Scale factors at the uniform sample positions and their normalization.

    ``gammas`` holds the raw factor at every sample ``i = 0 .. n-1``;
    ``used`` is the clamped copy that was normalized.  ``Gammas[i-1]`` is the
    normalized weight of sample ``i`` for ``i = 1 .. n-1`` (sample 0 is the
    starting point and carries no interval).
    """

    xs: np.ndarray
    kappa_i: np.ndarray
    kappa_f: np.ndarray
    gammas: np.ndarray
    used: np.ndarray
    Gammas: np.ndarray
    axis: str = "x"
    clamped: int = 0


@dataclass(frozen=True, eq=False)
class GridLattice:
    points: np.ndarray
    spec: GridSpec

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if len(pts) != self.spec.M * self.spec.N:
            raise ValueError(f"lattice needs {self.spec.M * self.spec.N} points, got {len(pts)}")
        object.__setattr__(self, "points", pts)

    @property
    def grid(self) -> np.ndarray:
        """Points as an ``(N, M, 2)`` array indexed ``[row, column]``."""
        return self.points.reshape(self.spec.N, self.spec.M, 2)

    def to_json(self) -> dict:
        return {"M": self.spec.M, "N": self.spec.N, "points": self.points.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "GridLattice":
        return cls(np.asarray(d["points"], dtype=np.float64), GridSpec(d["M"], d["N"]))


@dataclass(frozen=True, eq=False)
class QuadBlock:
    k: int
    corners: np.ndarray


def scale_factor(kappa_i, kappa_f, epsilon: float = EPSILON):
    """Interval scale ``|k| ** (-sign k)`` with ``k = (kappa_f - kappa_i) / 2``.

    ``|k| < epsilon`` is treated as the symmetric case and yields 1.
    """
    k = (np.asarray(kappa_f, dtype=np.float64) - np.asarray(kappa_i, dtype=np.float64)) / 2.0
    ak = np.abs(k)
    with np.errstate(divide="ignore"):
        gamma = np.where(k > 0, 1.0 / ak, ak)
    gamma = np.where(ak < epsilon, 1.0, gamma)
    return gamma if gamma.ndim else float(gamma)


def build_series(
    first: PolyCurve,
    last: PolyCurve,
    samples: int,
    epsilon: float = EPSILON,
    clamp: tuple[float, float] | None = GAMMA_CLAMP,
    as_printed: bool = False,
) -> ScaleSeries:
    """Sample both boundaries at ``samples`` uniform points and normalize.

    ``first`` supplies ``kappa_i`` (the top, or left, boundary) and ``last``
    supplies ``kappa_f``.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    lo, hi = first.domain
    if not np.allclose(first.domain, last.domain):
        raise ValueError("boundary curves must share a domain")
    xs = np.linspace(lo, hi, samples)
    ki = np.asarray(curvature(first, xs, as_printed=as_printed), dtype=np.float64)
    kf = np.asarray(curvature(last, xs, as_printed=as_printed), dtype=np.float64)
    if not (np.all(np.isfinite(ki)) and np.all(np.isfinite(kf))):
        raise ValueError("curvature undefined at a sample (slope below -1 with the printed formula)")
    gammas = np.asarray(scale_factor(ki, kf, epsilon), dtype=np.float64)
    used = gammas
    clamped = 0
    if clamp is not None:
        lo_c, hi_c = clamp
        if not 0 < lo_c <= hi_c:
            raise ValueError("gamma clamp must satisfy 0 < lo <= hi")
        used = np.clip(gammas, lo_c, hi_c)
        clamped = int(np.count_nonzero(used != gammas))
    tail = used[1:]
    Gammas = tail / tail.sum()
    return ScaleSeries(xs, ki, kf, gammas, used, Gammas, first.axis, clamped)


def interval_points(series: ScaleSeries | np.ndarray, x0: float, x_last: float) -> np.ndarray:
    """``X_0 = x0`` and ``X_{i+1} = X_i + Gamma_{i+1} * (x_last - x0)``."""
    if not x0 < x_last:
        raise ValueError("interval needs x0 < x_last")
    G = series.Gammas if isinstance(series, ScaleSeries) else np.asarray(series, dtype=np.float64)
    return np.concatenate([[x0], x0 + np.cumsum(G) * (x_last - x0)])


def _horner_rows(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate polynomials with coefficient rows ``coeffs[..., :]`` at ``x``."""
    y = np.broadcast_to(coeffs[..., -1], np.broadcast_shapes(coeffs.shape[:-1], x.shape)).copy()
    for c in np.moveaxis(coeffs[..., -2::-1], -1, 0):
        y = y * x + c
    return y


def _deriv_rows(coeffs: np.ndarray) -> np.ndarray:
    n = coeffs.shape[-1]
    if n == 1:
        return np.zeros_like(coeffs)
    return coeffs[..., 1:] * np.arange(1, n)


def family_params(positions, lo: float, hi: float) -> np.ndarray:
    return (np.asarray(positions, dtype=np.float64) - lo) / (hi - lo)


def build_lattice(
    vertical: CurveFamily,
    xs,
    horizontal: CurveFamily,
    ys,
    scan: int = 257,
    max_iter: int = 50,
    tol: float = 1e-9,
) -> GridLattice:
    """Intersect the vertical family sampled at ``xs`` with the horizontal at ``ys``.

    Column ``i`` is the vertical member at relative position
    ``(xs[i] - xs[0]) / (xs[-1] - xs[0])`` and row ``j`` likewise for the
    horizontal family.  Each intersection solves ``g(x) = x - V_i(H_j(x)) = 0``
    by Newton iteration seeded at ``xs[i]``, falling back to bisection inside
    the bracketing scan cell.  Every pair must cross exactly once within the
    horizontal domain (padded by 5 %), otherwise :class:`MeshFoldError`.

    All ``M x N`` intersections are independent and solved together as one
    vectorized batch.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    M, N = len(xs), len(ys)
    spec = GridSpec(M, N)
    if vertical.start.axis != "y" or horizontal.start.axis != "x":
        raise ValueError("vertical family must be x = V(y), horizontal y = H(x)")

    V = vertical.coeffs_at(family_params(xs, xs[0], xs[-1]))      # (M, d+1)
    H = horizontal.coeffs_at(family_params(ys, ys[0], ys[-1]))    # (N, d+1)
    Vd, Hd = _deriv_rows(V), _deriv_rows(H)
    Vb = V[None, :, :]
    Hb = H[:, None, :]
    Vdb = Vd[None, :, :]
    Hdb = Hd[:, None, :]

    def g(x):
        return x - _horner_rows(Vb, _horner_rows(Hb, x))

    lo, hi = horizontal.start.domain
    pad = 0.05 * (hi - lo)
    grid = np.linspace(lo - pad, hi + pad, scan)
    vals = g(np.broadcast_to(grid, (N, M, scan)).transpose(2, 0, 1))   # (scan, N, M)
    positive = vals >= 0
    crossings = positive[:-1] != positive[1:]
    count = crossings.sum(axis=0)
    bad = np.argwhere(count != 1)
    if len(bad):
        j, i = (int(v) for v in bad[0])
        raise MeshFoldError(i, j, "mesh fold" if count[j, i] > 1 else "mesh fold: no crossing in domain")
    cell = np.argmax(crossings, axis=0)
    a = grid[cell]
    b = grid[np.minimum(cell + 1, scan - 1)]

    x = np.clip(np.broadcast_to(xs[None, :], (N, M)).copy(), a, b)
    converged = np.zeros((N, M), dtype=bool)
    for _ in range(max_iter):
        hx = _horner_rows(Hb, x)
        gx = x - _horner_rows(Vb, hx)
        dg = 1.0 - _horner_rows(Vdb, hx) * _horner_rows(Hdb, x)
        safe = np.abs(dg) > 1e-12
        step = np.where(safe, gx / np.where(safe, dg, 1.0), 0.0)
        x_new = x - step
        converged = np.abs(step) <= tol * max(1.0, hi - lo)
        x = x_new
        if converged.all():
            break
    stray = ~converged | (x < a) | (x > b) | ~np.isfinite(x)
    if stray.any():
        log.debug("bisection fallback for %d intersections", int(stray.sum()))
        lo_b, hi_b = a.copy(), b.copy()
        g_lo = g(lo_b)
        for _ in range(80):
            mid = 0.5 * (lo_b + hi_b)
            gm = g(mid)
            left = np.sign(gm) == np.sign(g_lo)
            lo_b = np.where(left, mid, lo_b)
            g_lo = np.where(left, gm, g_lo)
            hi_b = np.where(left, hi_b, mid)
        x = np.where(stray, 0.5 * (lo_b + hi_b), x)
    if not np.all(np.isfinite(x)):
        j, i = (int(v) for v in np.argwhere(~np.isfinite(x))[0])
        raise MeshFoldError(i, j)
    y = _horner_rows(Hb, x)
    pts = np.stack([x, y], axis=-1).reshape(-1, 2)
    return GridLattice(pts, spec)


def block_indices(M: int, N: int) -> list[int]:
    """Admissible block origins: ``k mod M != M-1`` and ``k < M (N-1)``."""
    return [k for k in range(M * (N - 1)) if k % M != M - 1]


def extract_blocks(lattice: GridLattice) -> list[QuadBlock]:
    M = lattice.spec.M
    p = lattice.points
    return [QuadBlock(k, p[[k, k + 1, k + M, k + M + 1]].copy()) for k in block_indices(M, lattice.spec.N)]
