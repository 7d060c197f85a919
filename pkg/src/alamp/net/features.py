"""Per-patch feature extractors.

``handcrafted`` is parameter-free: luma histogram, gradient-magnitude
histogram and RGB means/variances. ``tiny_conv`` is a small trainable CNN,
conv3x3(8)-ReLU-maxpool2-conv3x3(16)-ReLU-maxpool2-FC(K), with hand-written
backward passes. Both map uint8 patches ``(N, s, s, 3)`` to ``(N, K)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from alamp.errors import InvalidInput, ShapeMismatch
from alamp.imaging import Image, central_gradients

KINDS = ("handcrafted", "tiny_conv")
N_BINS = 16
# largest central-difference gradient magnitude for 8-bit luma
_GRAD_MAX = 127.5 * np.sqrt(2.0)
CONV1_CH = 8
CONV2_CH = 16


@dataclass(frozen=True)
class ExtractorSpec:
    kind: str = "handcrafted"
    K: int = 64
    input_side: int = 32

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown extractor kind {self.kind!r}")
        if self.K < 1:
            raise InvalidInput("K must be >= 1")
        if self.input_side < 1:
            raise InvalidInput("input_side must be >= 1")
        if self.kind == "tiny_conv" and self.input_side % 4:
            raise InvalidInput("tiny_conv needs input_side divisible by 4")

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def fc_in(self) -> int:
        return CONV2_CH * (self.input_side // 4) ** 2


def param_shapes(spec: ExtractorSpec) -> dict[str, tuple[int, ...]]:
    if spec.kind == "handcrafted":
        return {}
    return {
        "ext.conv1.w": (CONV1_CH, 3, 3, 3),
        "ext.conv1.b": (CONV1_CH,),
        "ext.conv2.w": (CONV2_CH, CONV1_CH, 3, 3),
        "ext.conv2.b": (CONV2_CH,),
        "ext.fc.w": (spec.K, spec.fc_in),
        "ext.fc.b": (spec.K,),
    }


def as_patch_array(patches, spec: ExtractorSpec) -> np.ndarray:
    """Stack Images or arrays into a uint8 ``(N, s, s, 3)`` array, checking sides."""
    if isinstance(patches, np.ndarray):
        arr = patches
    else:
        arr = np.stack([p.pixels if isinstance(p, Image) else np.asarray(p) for p in patches])
    s = spec.input_side
    if arr.ndim != 4 or arr.shape[1:] != (s, s, 3):
        raise ShapeMismatch(f"expected patches of shape (N, {s}, {s}, 3), got {arr.shape}")
    return arr


def _histograms(values: np.ndarray, upper: float) -> np.ndarray:
    # values: (N, P) -> normalized counts (N, N_BINS); bins are [k*w, (k+1)*w)
    n, p = values.shape
    idx = np.clip((values * (N_BINS / upper)).astype(np.intp), 0, N_BINS - 1)
    idx += np.arange(n)[:, None] * N_BINS
    counts = np.bincount(idx.ravel(), minlength=n * N_BINS).reshape(n, N_BINS)
    return counts / p


def handcrafted_features(patches: np.ndarray, K: int) -> np.ndarray:
    rgb = patches.astype(np.float64)
    n = rgb.shape[0]
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    gx, gy = zip(*(central_gradients(plane) for plane in y))
    mag = np.hypot(np.stack(gx), np.stack(gy))
    flat = rgb.reshape(n, -1, 3) / 255.0
    feats = np.concatenate(
        [
            _histograms(y.reshape(n, -1), 256.0),
            _histograms(mag.reshape(n, -1), _GRAD_MAX * (1 + 1e-12)),
            flat.mean(axis=1),
            flat.var(axis=1),
        ],
        axis=1,
    )
    out = np.zeros((n, K), dtype=np.float64)
    width = min(K, feats.shape[1])
    out[:, :width] = feats[:, :width]
    return out


# --- tiny_conv building blocks -------------------------------------------


def conv3x3_forward(x, w, b):
    """Same-padded 3x3 convolution, ``x`` is ``(N, C, H, W)``."""
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = sliding_window_view(xp, (3, 3), axis=(2, 3))  # N, C, H, W, 3, 3
    out = np.einsum("nchwij,ocij->nohw", cols, w, optimize=True) + b[None, :, None, None]
    return out, (cols, x.shape)


def conv3x3_backward(dout, w, cache):
    cols, xshape = cache
    dw = np.einsum("nchwij,nohw->ocij", cols, dout, optimize=True)
    db = dout.sum(axis=(0, 2, 3))
    n, c, h, wd = xshape
    dxp = np.zeros((n, c, h + 2, wd + 2), dtype=dout.dtype)
    for i in range(3):
        for j in range(3):
            dxp[:, :, i:i + h, j:j + wd] += np.einsum("nohw,oc->nchw", dout, w[:, :, i, j], optimize=True)
    return dxp[:, :, 1:-1, 1:-1], dw, db


def maxpool2_forward(x):
    n, c, h, w = x.shape
    win = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return out, (arg, x.shape)


def maxpool2_backward(dout, cache):
    arg, (n, c, h, w) = cache
    win = np.zeros(dout.shape + (4,), dtype=dout.dtype)
    np.put_along_axis(win, arg[..., None], dout[..., None], axis=-1)
    return win.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)


def tiny_conv_forward(patches: np.ndarray, params: dict, spec: ExtractorSpec):
    """Returns ``(features (N, K), cache, signature)``."""
    x = patches.astype(np.float64).transpose(0, 3, 1, 2) / 255.0
    a1, c1 = conv3x3_forward(x, params["ext.conv1.w"], params["ext.conv1.b"])
    r1 = np.maximum(a1, 0.0)
    p1, pc1 = maxpool2_forward(r1)
    a2, c2 = conv3x3_forward(p1, params["ext.conv2.w"], params["ext.conv2.b"])
    r2 = np.maximum(a2, 0.0)
    p2, pc2 = maxpool2_forward(r2)
    flat = p2.reshape(p2.shape[0], -1)
    out = flat @ params["ext.fc.w"].T + params["ext.fc.b"]
    cache = (c1, a1, pc1, c2, a2, pc2, flat, p2.shape)
    signature = (a1 > 0, pc1[0], a2 > 0, pc2[0])
    return out, cache, signature


def tiny_conv_backward(dout: np.ndarray, params: dict, cache) -> dict:
    c1, a1, pc1, c2, a2, pc2, flat, p2shape = cache
    grads = {
        "ext.fc.w": dout.T @ flat,
        "ext.fc.b": dout.sum(axis=0),
    }
    dp2 = (dout @ params["ext.fc.w"]).reshape(p2shape)
    da2 = maxpool2_backward(dp2, pc2) * (a2 > 0)
    dp1, grads["ext.conv2.w"], grads["ext.conv2.b"] = conv3x3_backward(da2, params["ext.conv2.w"], c2)
    da1 = maxpool2_backward(dp1, pc1) * (a1 > 0)
    _, grads["ext.conv1.w"], grads["ext.conv1.b"] = conv3x3_backward(da1, params["ext.conv1.w"], c1)
    return grads


def extract_features(patch, spec: ExtractorSpec, params: dict | None = None) -> np.ndarray:
    """Feature vector of length ``spec.K`` for one patch."""
    arr = as_patch_array([patch], spec)
    if spec.kind == "handcrafted":
        return handcrafted_features(arr, spec.K)[0]
    return tiny_conv_forward(arr, params, spec)[0][0]
