"""PNG/JPEG reading and writing; the only place files meet rasters."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .raster import Raster

JPEG_QUALITY = 92


def read_image(path) -> Raster:
    with Image.open(path) as im:
        im.load()
        if im.mode in ("L", "I;16", "I", "F"):
            arr = np.asarray(im.convert("L"))
        else:
            arr = np.asarray(im.convert("RGB"))
    return Raster(arr)


def image_format(path, fmt: str | None = None) -> str:
    if fmt:
        fmt = fmt.lower()
    else:
        fmt = Path(path).suffix.lower().lstrip(".") or "png"
    if fmt in ("jpg", "jpeg"):
        return "jpeg"
    if fmt == "png":
        return "png"
    raise ValueError(f"unsupported output format {fmt!r}")


def write_image(img: Raster, path, fmt: str | None = None, quality: int = JPEG_QUALITY) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fmt = image_format(path, fmt)
    pil = Image.fromarray(np.ascontiguousarray(img.data))
    if fmt == "jpeg":
        pil.save(path, format="JPEG", quality=quality)
    else:
        # fixed compression settings keep repeated writes byte-identical
        pil.save(path, format="PNG", compress_level=6)
    return path
