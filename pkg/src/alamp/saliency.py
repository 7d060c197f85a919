"""Saliency estimation and per-patch mean saliency.

The default estimator is a global-contrast measure in the style of
frequency-tuned saliency: each pixel's blurred YCbCr colour is compared with
the image's mean colour, and the distance map is min-max normalized.
Any callable ``Image -> SaliencyMap`` can stand in for it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.ndimage import gaussian_filter

from alamp.imaging import Image, IntegralPlane, Rect, derive_planes, integral, rect_sum


@dataclass(frozen=True, eq=False)
class SaliencyMap:
    values: np.ndarray
    table: IntegralPlane

    @classmethod
    def from_array(cls, values: np.ndarray) -> "SaliencyMap":
        v = np.array(values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("saliency map must be 2-D")
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise ValueError("saliency values must lie in [0, 1]")
        v.flags.writeable = False
        return cls(v, integral(v))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def to_uint8(self) -> np.ndarray:
        return np.rint(self.values * 255.0).astype(np.uint8)


SaliencyEstimator = Callable[[Image], SaliencyMap]


def compute_saliency(img: Image) -> SaliencyMap:
    planes = derive_planes(img)
    sigma = min(img.width, img.height) / 16.0
    dist2 = np.zeros((img.height, img.width), dtype=np.float64)
    for plane in (planes.y, planes.cb, planes.cr):
        blurred = gaussian_filter(plane, sigma=sigma, mode="reflect")
        dist2 += (blurred - plane.mean()) ** 2
    contrast = np.sqrt(dist2)
    lo, hi = contrast.min(), contrast.max()
    if hi <= lo:
        return SaliencyMap.from_array(np.zeros_like(contrast))
    return SaliencyMap.from_array((contrast - lo) / (hi - lo))


def patch_saliency(smap: SaliencyMap, r: Rect) -> float:
    """Mean saliency inside ``r``."""
    s = rect_sum(smap.table, r) / (r.w * r.h)
    # integral-image differences can leave a few ulps outside [0, 1]
    return min(1.0, max(0.0, s))
