"""Image decoding and the derived planes used by saliency, pattern and selection.

Arrays are row-major ``(height, width[, channels])``. Every value returned
here is read-only so it can be shared between threads without copies.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from alamp.errors import CorruptData, InvalidInput, NotFound, OutOfBounds, UnsupportedFormat

_SUPPORTED_FORMATS = {"PNG", "JPEG"}


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle; ``(x, y)`` is the top-left pixel."""

    x: float
    y: float
    w: float
    h: float

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def inside(self, width: float, height: float) -> bool:
        return (
            self.w > 0 and self.h > 0 and self.x >= 0 and self.y >= 0
            and self.x + self.w <= width and self.y + self.h <= height
        )

    def as_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


@dataclass(frozen=True, eq=False)
class Image:
    """Decoded 8-bit RGB raster, ``pixels`` has shape ``(height, width, 3)``."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] < 1 or p.shape[1] < 1:
            raise InvalidInput(f"expected (H, W, 3) pixels, got shape {p.shape}")
        if p.dtype != np.uint8:
            raise InvalidInput(f"expected uint8 pixels, got {p.dtype}")
        object.__setattr__(self, "pixels", _frozen(np.array(p, copy=True)))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return (self.width, self.height)


@dataclass(frozen=True, eq=False)
class PlaneSet:
    y: np.ndarray
    cb: np.ndarray
    cr: np.ndarray
    gx: np.ndarray
    gy: np.ndarray

    @property
    def width(self) -> int:
        return self.y.shape[1]

    @property
    def height(self) -> int:
        return self.y.shape[0]


@dataclass(frozen=True, eq=False)
class IntegralPlane:
    """Cumulative sums with a zero first row and column, shape ``(H+1, W+1)``."""

    table: np.ndarray

    @property
    def width(self) -> int:
        return self.table.shape[1] - 1

    @property
    def height(self) -> int:
        return self.table.shape[0] - 1


def load_image(path: str | os.PathLike) -> Image:
    """Decode a PNG or JPEG file into an 8-bit RGB :class:`Image`."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise NotFound(f"no such image: {path}")
    try:
        with PILImage.open(path) as im:
            fmt = im.format
            if fmt not in _SUPPORTED_FORMATS:
                raise UnsupportedFormat(f"{path}: format {fmt} is not PNG or JPEG")
            im.load()
            rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise CorruptData(f"{path}: cannot decode image ({exc})") from exc
    return Image(rgb)


def save_png(path: str | os.PathLike, pixels: np.ndarray) -> None:
    """Write a uint8 gray ``(H, W)`` or RGB ``(H, W, 3)`` array as PNG."""
    PILImage.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8)).save(path, format="PNG")


def derive_planes(img: Image) -> PlaneSet:
    """Full-range BT.601 YCbCr planes plus central-difference gradients of Y."""
    rgb = img.pixels.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    # the coefficient rows sum to zero, but rounding does not; pin gray exactly
    gray = (rgb[..., 0] == rgb[..., 1]) & (rgb[..., 1] == rgb[..., 2])
    cb[gray] = 128.0
    cr[gray] = 128.0
    y[gray] = r[gray]
    gx, gy = central_gradients(y)
    return PlaneSet(*(_frozen(a) for a in (y, cb, cr, gx, gy)))


def central_gradients(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    padded = np.pad(plane, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return gx, gy


def integral(plane: np.ndarray) -> IntegralPlane:
    plane = np.asarray(plane, dtype=np.float64)
    table = np.zeros((plane.shape[0] + 1, plane.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(plane, axis=0), axis=1, out=table[1:, 1:])
    return IntegralPlane(_frozen(table))


def _check_int_rect(r: Rect, width: int, height: int) -> tuple[int, int, int, int]:
    vals = (r.x, r.y, r.w, r.h)
    if any(int(v) != v for v in vals):
        raise OutOfBounds(f"{r} does not have integer pixel coordinates")
    x, y, w, h = (int(v) for v in vals)
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > width or y + h > height:
        raise OutOfBounds(f"{r} is not inside a {width}x{height} plane")
    return x, y, w, h


def rect_sum(ip: IntegralPlane, r: Rect) -> float:
    x, y, w, h = _check_int_rect(r, ip.width, ip.height)
    t = ip.table
    return float(t[y + h, x + w] - t[y, x + w] - t[y + h, x] + t[y, x])


def crop(a: np.ndarray, r: Rect) -> np.ndarray:
    """View of ``a`` restricted to ``r`` (first two axes are rows, columns)."""
    x, y, w, h = _check_int_rect(r, a.shape[1], a.shape[0])
    return a[y:y + h, x:x + w]


def _sample_grid(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # pixel-center alignment; identity when n_in == n_out
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def crop_resize(img: Image, r: Rect, out_side: int) -> Image:
    """Bilinear resample of ``img`` cropped to ``r`` onto an ``out_side`` square."""
    if out_side < 1:
        raise InvalidInput("out_side must be >= 1")
    region = crop(img.pixels, r).astype(np.float64)
    h, w = region.shape[:2]
    if h == out_side and w == out_side:
        return Image(crop(img.pixels, r))
    y0, y1, fy = _sample_grid(h, out_side)
    x0, x1, fx = _sample_grid(w, out_side)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = region[y0][:, x0] * (1 - fx) + region[y0][:, x1] * fx
    bottom = region[y1][:, x0] * (1 - fx) + region[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return Image(np.clip(np.rint(out), 0, 255).astype(np.uint8))
