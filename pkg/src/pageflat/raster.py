"""Pixel buffers, Otsu binarization and bilinear sampling.

Images are held as 8-bit numpy arrays, ``(height, width)`` for gray and
``(height, width, 3)`` for RGB.  Coordinates follow the image convention used
throughout the package: ``u`` (or ``x``) runs along columns, ``v`` (or ``y``)
down the rows, and pixel centers sit on integer coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateHistogramError

CLAMP = "clamp"
TRANSPARENT = "transparent"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Raster:
    """Immutable 8-bit image, gray or RGB."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype != np.uint8:
            if arr.size and (np.nanmin(arr) < 0 or np.nanmax(arr) > 255):
                raise ValueError("intensity values must lie in [0, 255]")
            arr = np.rint(arr).astype(np.uint8)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
            raise ValueError(f"unsupported raster shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("raster must be at least 1x1")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Foreground mask (page = True) plus the threshold that produced it."""

    bits: np.ndarray
    threshold: int | None = field(default=None)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise ValueError("mask must be 2-D")
        object.__setattr__(self, "bits", _frozen(bits))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


def to_grayscale(img: Raster) -> Raster:
    """ITU-R 601 luma, rounded half away from zero and clamped to 8 bits."""
    if img.channels != 3:
        raise ValueError("to_grayscale expects a 3-channel raster")
    rgb = img.data.astype(np.float64)
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    # floor(x + 0.5) keeps 76.245 -> 76 and 127.5 -> 128 regardless of banker's rounding
    return Raster(np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8))


def otsu_threshold(hist: np.ndarray) -> int:
    """Threshold ``t`` maximizing between-class variance; class 1 is ``>= t``.

    When several thresholds tie (empty bins between two modes) the middle of
    the plateau is returned.
    """
    hist = np.asarray(hist, dtype=np.float64)
    total = hist.sum()
    if total <= 0 or np.count_nonzero(hist) < 2:
        raise DegenerateHistogramError("degenerate histogram")
    levels = np.arange(hist.size, dtype=np.float64)
    # w0[t] / m0[t]: weight and first moment of the bins strictly below t
    w0 = np.concatenate([[0.0], np.cumsum(hist)])[:-1] / total
    m0 = np.concatenate([[0.0], np.cumsum(hist * levels)])[:-1] / total
    mu_total = m0[-1] + hist[-1] * levels[-1] / total
    w1 = 1.0 - w0
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (mu_total * w0 - m0) ** 2 / (w0 * w1)
    between[(w0 <= 0) | (w1 <= 0)] = -1.0
    best = between.max()
    ties = np.flatnonzero(between >= best - 1e-9 * max(best, 1.0))
    return int(round(ties.mean()))


def binarize_otsu(img: Raster, threshold: int | None = None) -> BinaryMask:
    """Global threshold; ``pixel >= t`` is foreground.

    ``threshold`` overrides the Otsu search with a fixed level in [0, 255].
    """
    if img.channels != 1:
        raise ValueError("binarize_otsu expects a 1-channel raster")
    if threshold is None:
        hist = np.bincount(img.data.ravel(), minlength=256)
        t = otsu_threshold(hist)
    else:
        if not 0 <= threshold <= 255:
            raise ValueError("threshold must lie in [0, 255]")
        t = int(threshold)
    return BinaryMask(img.data >= t, t)


def sample_bilinear(img: Raster, u, v, policy: str = CLAMP, fill: float = 0.0) -> np.ndarray:
    """Bilinearly interpolate ``img`` at real coordinates ``(u, v)``.

    ``u`` and ``v`` may be scalars or broadcastable arrays.  The result has the
    broadcast shape, with a trailing channel axis for RGB input.  Coordinates
    outside ``[0, width-1] x [0, height-1]`` are clamped onto the border
    (``policy="clamp"``) or receive ``fill`` (``policy="transparent"``).
    """
    if policy not in (CLAMP, TRANSPARENT):
        raise ValueError(f"unknown out-of-range policy {policy!r}")
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    u, v = np.broadcast_arrays(u, v)
    h, w = img.height, img.width
    data = img.data.astype(np.float64)

    uc = np.clip(u, 0.0, w - 1.0)
    vc = np.clip(v, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(uc).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(vc).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = uc - x0
    fy = vc - y0
    if img.channels == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = data[y0, x0] * (1.0 - fx) + data[y0, x1] * fx
    bottom = data[y1, x0] * (1.0 - fx) + data[y1, x1] * fx
    out = top * (1.0 - fy) + bottom * fy

    if policy == TRANSPARENT:
        outside = (u < 0) | (u > w - 1) | (v < 0) | (v > h - 1)
        if img.channels == 3:
            outside = outside[..., None]
        out = np.where(outside, fill, out)
    return out


def to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(np.asarray(values) + 0.5), 0, 255).astype(np.uint8)


def resize_bilinear(img: Raster, width: int, height: int) -> Raster:
    """Resample so that corner pixel centers map onto corner pixel centers."""
    if width == img.width and height == img.height:
        return img
    us = np.linspace(0.0, img.width - 1.0, width) if width > 1 else np.zeros(1)
    vs = np.linspace(0.0, img.height - 1.0, height) if height > 1 else np.zeros(1)
    uu, vv = np.meshgrid(us, vs)
    return Raster(to_uint8(sample_bilinear(img, uu, vv)))
