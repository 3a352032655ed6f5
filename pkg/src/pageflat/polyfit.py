"""Boundary polynomials: least-squares fit, derivatives, curvature, evolution.

A :class:`PolyCurve` stores ascending coefficients ``c_0 .. c_n`` in the raw
pixel basis.  ``axis="x"`` means the curve is ``y = P(x)`` (top and bottom
boundaries); ``axis="y"`` means ``x = P(y)`` (left and right boundaries).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DegenerateAbscissaeError

log = logging.getLogger(__name__)

MIN_DEGREE = 2


@dataclass(frozen=True, eq=False)
class PolyCurve:
    coeffs: np.ndarray
    axis: str = "x"
    domain: tuple[float, float] = (0.0, 1.0)
    rms: float = 0.0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=np.float64)).copy()
        if len(c) < MIN_DEGREE + 1:
            c = np.concatenate([c, np.zeros(MIN_DEGREE + 1 - len(c))])
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        lo, hi = (float(v) for v in self.domain)
        if not lo < hi:
            raise ValueError(f"empty domain [{lo}, {hi}]")
        object.__setattr__(self, "domain", (lo, hi))
        if self.axis not in ("x", "y"):
            raise ValueError("axis must be 'x' or 'y'")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return eval_poly(self, x)

    def with_coeffs(self, coeffs) -> "PolyCurve":
        return PolyCurve(coeffs, self.axis, self.domain)

    def to_json(self) -> dict:
        return {"coeffs": self.coeffs.tolist(), "axis": self.axis,
                "domain": list(self.domain), "rms": self.rms}

    @classmethod
    def from_json(cls, d: dict) -> "PolyCurve":
        return cls(d["coeffs"], d.get("axis", "x"), tuple(d["domain"]), d.get("rms", 0.0))


def _horner(coeffs: np.ndarray, x):
    x = np.asarray(x, dtype=np.float64)
    y = np.zeros_like(x) + coeffs[-1]
    for c in coeffs[-2::-1]:
        y = y * x + c
    return y


def eval_poly(p: PolyCurve, x):
    """Horner evaluation; extrapolation outside the domain is allowed."""
    return _horner(p.coeffs, x)


def deriv_coeffs(coeffs: np.ndarray, order: int) -> np.ndarray:
    c = np.asarray(coeffs, dtype=np.float64)
    for _ in range(order):
        if len(c) == 1:
            return np.zeros(1)
        c = c[1:] * np.arange(1, len(c))
    return c


def deriv(p: PolyCurve, x, order: int = 1):
    if order not in (1, 2):
        raise ValueError("only first and second derivatives are supported")
    return _horner(deriv_coeffs(p.coeffs, order), x)


def curvature(p: PolyCurve, x, as_printed: bool = False):
    """Signed curvature ``P'' / (1 + P'^2)^(3/2)``.

    ``as_printed=True`` evaluates ``P'' / (1 + P')^(3/2)`` instead, which is
    complex (returned as nan) wherever ``P' < -1``.
    """
    d1 = deriv(p, x, 1)
    d2 = deriv(p, x, 2)
    if as_printed:
        base = 1.0 + d1
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(base > 0, d2 / np.abs(base) ** 1.5, np.nan)
    return d2 / (1.0 + d1 * d1) ** 1.5


def inflections(p: PolyCurve) -> list[float]:
    """Real roots of ``P''`` inside the domain at which ``P''`` changes sign."""
    lo, hi = p.domain
    scale = max(abs(lo), abs(hi), hi - lo)
    d2 = deriv_coeffs(p.coeffs, 2)
    # drop leading terms too small to matter anywhere on the domain
    size = np.abs(d2) * scale ** np.arange(len(d2))
    keep = np.flatnonzero(size > 1e-13 * size.max()) if size.max() > 0 else []
    d2 = d2[: keep[-1] + 1] if len(keep) else d2[:0]
    if len(d2) <= 1:
        return []
    roots = npoly.polyroots(d2)
    tol = 1e-7 * scale
    real = sorted(float(r.real) for r in roots if abs(r.imag) <= tol)
    out = []
    for r in real:
        if not lo <= r <= hi:
            continue
        if out and abs(r - out[-1]) <= tol:
            continue
        # only odd-multiplicity roots flip the sign of P''
        h = max(1e-6 * scale, 1e-9)
        left = _horner(d2, r - h)
        right = _horner(d2, r + h)
        if left * right < 0 or (left == 0) != (right == 0):
            out.append(r)
    # drop pairs of nearly coincident roots (an even-multiplicity root split by rounding)
    cleaned = []
    for r in out:
        if cleaned and abs(r - cleaned[-1]) <= 1e-4 * scale:
            cleaned.pop()
            continue
        cleaned.append(r)
    return cleaned


def _affine_compose(coeffs_t: np.ndarray, a: float, b: float) -> np.ndarray:
    """Coefficients in ``x`` of ``sum c_k t^k`` where ``t = a x + b``."""
    out = np.zeros(1)
    power = np.ones(1)
    lin = np.array([b, a])
    for c in coeffs_t:
        out = npoly.polyadd(out, c * power)
        power = npoly.polymul(power, lin)
    return out


def fit(chain, degree: int = 4, axis: str = "x", domain: tuple[float, float] | None = None) -> PolyCurve:
    """Least-squares polynomial of ``degree`` through a boundary chain.

    The free variable is normalized to [-1, 1] before a QR solve and the
    coefficients are mapped back to the pixel basis.  The returned curve's
    ``rms`` is the residual root-mean-square in pixels.
    """
    if degree < MIN_DEGREE:
        raise ValueError(f"degree must be >= {MIN_DEGREE}")
    pts = np.asarray(chain, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("chain must have shape (n, 2)")
    if len(pts) < degree + 1:
        raise DegenerateAbscissaeError(f"degenerate abscissae: {len(pts)} points for degree {degree}")
    free, value = (pts[:, 0], pts[:, 1]) if axis == "x" else (pts[:, 1], pts[:, 0])
    lo, hi = float(free.min()), float(free.max())
    if not hi > lo:
        raise DegenerateAbscissaeError("degenerate abscissae: all points share one abscissa")
    a = 2.0 / (hi - lo)
    b = -(hi + lo) / (hi - lo)
    t = a * free + b
    vander = np.vander(t, degree + 1, increasing=True)
    q, r = np.linalg.qr(vander)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * diag.max():
        raise DegenerateAbscissaeError("degenerate abscissae: rank-deficient design matrix")
    coeffs_t = np.linalg.solve(r, q.T @ value)
    resid = vander @ coeffs_t - value
    coeffs = _affine_compose(coeffs_t, a, b)
    if len(coeffs) < degree + 1:
        coeffs = np.concatenate([coeffs, np.zeros(degree + 1 - len(coeffs))])
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return PolyCurve(coeffs, axis, domain if domain is not None else (lo, hi), rms)


def residual_rms(p: PolyCurve, chain) -> float:
    pts = np.asarray(chain, dtype=np.float64)
    free, value = (pts[:, 0], pts[:, 1]) if p.axis == "x" else (pts[:, 1], pts[:, 0])
    return float(np.sqrt(np.mean((eval_poly(p, free) - value) ** 2)))


@dataclass(frozen=True, eq=False)
class CurveFamily:
    """Members ``start + i * step`` for ``i = 0 .. count - 1``."""

    start: PolyCurve
    step: np.ndarray
    count: int

    def member(self, i) -> PolyCurve:
        """Member ``i``; a fractional ``i`` interpolates between neighbours.

        Because the evolution is linear in coefficient space, the fractional
        member equals the linear blend of its two integer neighbours.
        """
        if not 0 <= i <= self.count - 1:
            raise IndexError(f"member {i} outside family of {self.count}")
        return self.start.with_coeffs(self.start.coeffs + i * self.step)

    def at(self, t: float) -> PolyCurve:
        """Member at relative position ``t`` in [0, 1] along the family."""
        return self.member(min(max(t, 0.0), 1.0) * (self.count - 1))

    def coeffs_at(self, t) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
        return self.start.coeffs + (t * (self.count - 1))[..., None] * self.step

    def __len__(self):
        return self.count

    def __iter__(self):
        return (self.member(i) for i in range(self.count))


def pad_coeffs(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = max(len(a), len(b))
    return (np.concatenate([a, np.zeros(n - len(a))]), np.concatenate([b, np.zeros(n - len(b))]))


def evolve_family(p0: PolyCurve, pn: PolyCurve, steps: int) -> CurveFamily:
    """Uniform evolution from ``p0`` to ``pn`` in ``steps`` increments.

    The step is ``(pn - p0) / steps`` coefficient-wise; the family holds
    ``steps + 1`` members, member 0 being ``p0`` and the last one ``pn``.
    Lower-degree inputs are padded with zero coefficients.
    """
    if steps < 2:
        raise ValueError("evolution needs at least 2 steps")
    if p0.axis != pn.axis:
        raise ValueError("curves must share the free axis")
    if not np.allclose(p0.domain, pn.domain):
        raise ValueError("curves must share a domain")
    c0, cn = pad_coeffs(p0.coeffs, pn.coeffs)
    d = (cn - c0) / steps
    start = PolyCurve(c0, p0.axis, p0.domain, p0.rms)
    return CurveFamily(start, d, steps + 1)
