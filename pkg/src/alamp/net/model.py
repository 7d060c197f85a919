"""Multi-patch network with a fused layout head.

Forward pass for a batch of bags::

    patches (B, M, s, s, 3) -> extractor -> blob (B, M, K)
    -> orderless statistics (B, U*K) -> FC + ReLU -> FC -> mp (B, K_stat)
    -> concat(mp, layout (B, 34)) -> FC -> logit -> sigmoid

All arithmetic is float64; gradients are accumulated by hand in reverse order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from alamp.errors import InvalidInput, ShapeMismatch
from alamp.layout import LAYOUT_DIM
from alamp.net import features as feat
from alamp.net.aggregate import aggregate_backward, aggregate_forward, canonical_stats

STAGES = ("mp_only", "fused")


@dataclass(frozen=True)
class ModelConfig:
    extractor: feat.ExtractorSpec = field(default_factory=feat.ExtractorSpec)
    k_stat: int = 32
    stats: tuple[str, ...] = ("max", "mean")
    m: int = 3

    def __post_init__(self):
        object.__setattr__(self, "stats", canonical_stats(self.stats))
        if self.k_stat < 1 or self.m < 1:
            raise InvalidInput("k_stat and m must be >= 1")

    def to_dict(self) -> dict:
        return {
            "extractor": self.extractor.to_dict(),
            "k_stat": self.k_stat,
            "stats": list(self.stats),
            "m": self.m,
            "layout_dim": LAYOUT_DIM,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d.pop("layout_dim", None)
        ext = feat.ExtractorSpec(**d.pop("extractor", {}))
        if "stats" in d:
            d["stats"] = tuple(d["stats"])
        return cls(extractor=ext, **d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    uk = len(cfg.stats) * cfg.extractor.K
    shapes = dict(feat.param_shapes(cfg.extractor))
    shapes.update(
        {
            "agg.fc1.w": (cfg.k_stat, uk),
            "agg.fc1.b": (cfg.k_stat,),
            "agg.fc2.w": (cfg.k_stat, cfg.k_stat),
            "agg.fc2.b": (cfg.k_stat,),
            "head.w": (cfg.k_stat + LAYOUT_DIM,),
            "head.b": (1,),
        }
    )
    return shapes


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Immutable snapshot of all trainable tensors plus momentum buffers."""

    config: ModelConfig
    tensors: dict
    velocity: dict
    stage: str = "mp_only"

    def __post_init__(self):
        if self.stage not in STAGES:
            raise InvalidInput(f"unknown stage {self.stage!r}")
        shapes = param_shapes(self.config)
        for store in (self.tensors, self.velocity):
            if set(store) != set(shapes):
                raise ShapeMismatch(f"tensor names {sorted(store)} do not match config")
            for name, shape in shapes.items():
                if store[name].shape != shape:
                    raise ShapeMismatch(f"{name}: shape {store[name].shape}, expected {shape}")

    def names(self) -> list[str]:
        return list(param_shapes(self.config))

    def with_tensors(self, tensors: dict, velocity: dict | None = None, stage: str | None = None) -> "ModelParams":
        return ModelParams(
            self.config,
            tensors,
            self.velocity if velocity is None else velocity,
            self.stage if stage is None else stage,
        )

    def equals(self, other: "ModelParams") -> bool:
        """Bit-for-bit equality of config, stage, tensors and buffers."""
        if self.config != other.config or self.stage != other.stage:
            return False
        return all(
            np.array_equal(a[n], b[n]) and a[n].dtype == b[n].dtype
            for a, b in ((self.tensors, other.tensors), (self.velocity, other.velocity))
            for n in a
        )


def round_f32(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def init_params(cfg: ModelConfig, rng: np.random.Generator, stage: str = "mp_only") -> ModelParams:
    """He-normal weights and zero biases, rounded to float32-representable values."""
    tensors = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".b"):
            tensors[name] = np.zeros(shape)
            continue
        fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else shape[0]
        gain = 1.0 if name == "head.w" else 2.0
        tensors[name] = round_f32(rng.normal(0.0, np.sqrt(gain / fan_in), size=shape))
    velocity = {n: np.zeros_like(t) for n, t in tensors.items()}
    return ModelParams(cfg, tensors, velocity, stage)


def zero_params(cfg: ModelConfig, stage: str = "fused") -> ModelParams:
    tensors = {n: np.zeros(s) for n, s in param_shapes(cfg).items()}
    return ModelParams(cfg, tensors, {n: np.zeros(s) for n, s in param_shapes(cfg).items()}, stage)


@dataclass(frozen=True, eq=False)
class Batch:
    """A batch of bags. Exactly one of ``patches``/``blob`` is set.

    ``blob`` holds precomputed features and is only valid for the
    parameter-free handcrafted extractor.
    """

    layout: np.ndarray
    labels: np.ndarray | None = None
    patches: np.ndarray | None = None
    blob: np.ndarray | None = None

    def __len__(self) -> int:
        return self.layout.shape[0]

    def take(self, idx) -> "Batch":
        return Batch(
            self.layout[idx],
            None if self.labels is None else self.labels[idx],
            None if self.patches is None else self.patches[idx],
            None if self.blob is None else self.blob[idx],
        )


def compute_blob(patches: np.ndarray, params: ModelParams):
    """Features for ``patches`` ``(B, M, s, s, 3)``; returns ``(blob, cache, signature)``."""
    spec = params.config.extractor
    b, m = patches.shape[:2]
    flat = feat.as_patch_array(patches.reshape((b * m,) + patches.shape[2:]), spec)
    if spec.kind == "handcrafted":
        return feat.handcrafted_features(flat, spec.K).reshape(b, m, spec.K), None, ()
    out, cache, sig = feat.tiny_conv_forward(flat, params.tensors, spec)
    return out.reshape(b, m, spec.K), cache, sig


def _layout_input(batch: Batch, params: ModelParams) -> np.ndarray:
    nu = np.asarray(batch.layout, dtype=np.float64)
    if nu.ndim != 2 or nu.shape[1] != LAYOUT_DIM:
        raise ShapeMismatch(f"layout batch must be (B, {LAYOUT_DIM}), got {nu.shape}")
    if params.stage == "mp_only":
        # the layout branch is not part of the first training stage
        return np.zeros_like(nu)
    return nu


def _forward(params: ModelParams, batch: Batch):
    cfg = params.config
    t = params.tensors
    if batch.blob is not None:
        if cfg.extractor.kind != "handcrafted":
            raise InvalidInput("precomputed blobs require the handcrafted extractor")
        blob, ext_cache, ext_sig = np.asarray(batch.blob, dtype=np.float64), None, ()
    else:
        blob, ext_cache, ext_sig = compute_blob(batch.patches, params)
    if blob.shape[1] != cfg.m or blob.shape[2] != cfg.extractor.K:
        raise ShapeMismatch(f"expected bags of {cfg.m} x {cfg.extractor.K} features, got {blob.shape[1:]}")
    agg, agg_cache = aggregate_forward(blob, cfg.stats)
    h1_pre = agg @ t["agg.fc1.w"].T + t["agg.fc1.b"]
    h1 = np.maximum(h1_pre, 0.0)
    mp = h1 @ t["agg.fc2.w"].T + t["agg.fc2.b"]
    nu = _layout_input(batch, params)
    fused = np.concatenate([mp, nu], axis=1)
    logits = fused @ t["head.w"] + t["head.b"][0]
    cache = (ext_cache, agg_cache, agg, h1_pre, h1, fused)
    signature = ext_sig + (agg_cache[1], h1_pre > 0)
    return logits, cache, signature


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def predict(params: ModelParams, batch: Batch) -> np.ndarray:
    return sigmoid(_forward(params, batch)[0])


def forward(patches, layout, params: ModelParams) -> float:
    """Probability of the high-quality class for one bag of patches."""
    spec = params.config.extractor
    arr = feat.as_patch_array(patches, spec)
    if arr.shape[0] != params.config.m:
        raise ShapeMismatch(f"expected {params.config.m} patches, got {arr.shape[0]}")
    batch = Batch(np.asarray(layout, dtype=np.float64)[None], patches=arr[None])
    return float(predict(params, batch)[0])


def loss_and_grads(params: ModelParams, batch: Batch, with_signature: bool = False):
    """Mean binary cross-entropy over the batch and its gradient for every tensor."""
    y = np.asarray(batch.labels, dtype=np.float64)
    if np.any((y != 0) & (y != 1)):
        raise InvalidInput("labels must be 0 or 1")
    logits, cache, signature = _forward(params, batch)
    n = len(y)
    # softplus(z) - y*z, evaluated stably
    loss = float(np.mean(np.maximum(logits, 0) + np.log1p(np.exp(-np.abs(logits))) - y * logits))
    dz = (sigmoid(logits) - y) / n

    t = params.tensors
    ext_cache, agg_cache, agg, h1_pre, h1, fused = cache
    grads = {
        "head.w": fused.T @ dz,
        "head.b": np.array([dz.sum()]),
    }
    k_stat = params.config.k_stat
    dmp = np.outer(dz, t["head.w"][:k_stat])
    grads["agg.fc2.w"] = dmp.T @ h1
    grads["agg.fc2.b"] = dmp.sum(axis=0)
    dh1 = (dmp @ t["agg.fc2.w"]) * (h1_pre > 0)
    grads["agg.fc1.w"] = dh1.T @ agg
    grads["agg.fc1.b"] = dh1.sum(axis=0)
    if ext_cache is not None:
        dagg = dh1 @ t["agg.fc1.w"]
        dblob = aggregate_backward(dagg, agg_cache)
        dfeat = dblob.reshape(-1, dblob.shape[-1])
        grads.update(feat.tiny_conv_backward(dfeat, t, ext_cache))
    if with_signature:
        return loss, grads, signature
    return loss, grads


def loss_only(params: ModelParams, batch: Batch):
    loss, _, sig = loss_and_grads(params, batch, with_signature=True)
    return loss, sig


def perturbed(params: ModelParams, name: str, flat_index: int, delta: float) -> ModelParams:
    tensors = dict(params.tensors)
    t = tensors[name].copy()
    t.flat[flat_index] += delta
    tensors[name] = t
    return replace(params, tensors=tensors)
