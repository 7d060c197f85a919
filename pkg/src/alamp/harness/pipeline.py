"""Per-image pipeline: saliency -> patch selection -> crops -> layout -> network."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from alamp.errors import InvalidInput, LampError
from alamp.harness.manifest import HIGH, ManifestEntry
from alamp.harness.metrics import Metrics, confusion
from alamp.imaging import Image, crop_resize, derive_planes, load_image
from alamp.layout import Detection, layout_vector, load_detections, sidecar_path
from alamp.net.model import Batch, ModelParams, predict
from alamp.net.train import Example
from alamp.saliency import SaliencyEstimator, compute_saliency
from alamp.selector import PatchSet, SelectionProblem, SelectorConfig, generate_candidates, select

log = logging.getLogger(__name__)

THRESHOLD = 0.5


@dataclass(frozen=True)
class PipelineConfig:
    selector: SelectorConfig = field(default_factory=lambda: SelectorConfig(m=3, window=32, stride=16))
    solver: str = "local_search"

    def to_dict(self) -> dict:
        return {"selector": self.selector.to_dict(), "solver": self.solver}

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(SelectorConfig.from_dict(d.get("selector", {})), d.get("solver", "local_search"))


def select_patches(img: Image, cfg: SelectorConfig, solver: str = "local_search",
                   estimator: SaliencyEstimator = compute_saliency) -> PatchSet:
    smap = estimator(img)
    planes = derive_planes(img)
    cands = generate_candidates(img.dims, cfg, smap, planes)
    return select(SelectionProblem(cands, cfg, img.dims), solver)


def bag_from_image(img: Image, dets: list[Detection], cfg: PipelineConfig, input_side: int):
    """Selected patches as uint8 ``(M, s, s, 3)`` plus the layout vector."""
    chosen = select_patches(img, cfg.selector, cfg.solver)
    patches = np.stack([crop_resize(img, c.rect, input_side).pixels for c in chosen.members])
    return patches, layout_vector(dets, img.dims), chosen


def load_bag(image_path: str, cfg: PipelineConfig, input_side: int, dets_path: str | None = None):
    img = load_image(image_path)
    dets = load_detections(dets_path or sidecar_path(image_path))
    patches, nu, _ = bag_from_image(img, dets, cfg, input_side)
    return patches, nu


def check_compatible(params: ModelParams, cfg: PipelineConfig) -> None:
    if params.config.m != cfg.selector.m:
        raise InvalidInput(f"model expects {params.config.m} patches, selector gives {cfg.selector.m}")


def score_bag(params: ModelParams, patches: np.ndarray, nu: np.ndarray) -> float:
    return float(predict(params, Batch(nu[None], patches=patches[None]))[0])


def score_image(params: ModelParams, image_path: str, cfg: PipelineConfig, dets_path: str | None = None) -> float:
    check_compatible(params, cfg)
    patches, nu = load_bag(image_path, cfg, params.config.extractor.input_side, dets_path)
    return score_bag(params, patches, nu)


def example_from_entry(entry: ManifestEntry, cfg: PipelineConfig, input_side: int) -> Example:
    patches, nu = load_bag(entry.path, cfg, input_side)
    return Example(patches, nu, int(entry.label == HIGH))


def _threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("LAMP_THREADS", "1") or 1)
    return max(1, threads)


def build_examples(entries, cfg: PipelineConfig, input_side: int, skip_errors: bool = False,
                   threads: int | None = None):
    """Run the pipeline over manifest entries; returns ``(examples, skipped)``."""

    def one(entry):
        try:
            return example_from_entry(entry, cfg, input_side)
        except LampError as exc:
            if not skip_errors:
                raise
            log.warning("skipping %s: %s", entry.path, exc)
            return None

    with ThreadPoolExecutor(max_workers=_threads(threads)) as pool:
        results = list(pool.map(one, entries))
    examples = [r for r in results if r is not None]
    return examples, len(results) - len(examples)


@dataclass(frozen=True)
class Evaluation:
    metrics: Metrics
    skipped: int
    scores: dict

    def to_json(self) -> dict:
        return {**self.metrics.to_json(), "skipped": self.skipped}


def evaluate(params: ModelParams, entries, cfg: PipelineConfig, skip_errors: bool = False,
             threads: int | None = None) -> Evaluation:
    """Threshold each image's score at 0.5 (a score of exactly 0.5 counts as high)."""
    check_compatible(params, cfg)
    side = params.config.extractor.input_side

    def one(entry):
        try:
            patches, nu = load_bag(entry.path, cfg, side)
        except LampError as exc:
            if not skip_errors:
                raise
            log.warning("skipping %s: %s", entry.path, exc)
            return entry, None
        return entry, score_bag(params, patches, nu)

    with ThreadPoolExecutor(max_workers=_threads(threads)) as pool:
        results = list(pool.map(one, entries))
    scored = [(e, s) for e, s in results if s is not None]
    metrics = confusion([s >= THRESHOLD for _, s in scored], [e.label == HIGH for e, _ in scored])
    return Evaluation(metrics, len(results) - len(scored), {e.path: s for e, s in scored})
