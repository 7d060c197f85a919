"""Two-stage training: multi-patch subnet first, then the fused model."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from alamp.errors import EmptySet, InvalidInput, MissingStage1Checkpoint
from alamp.net.model import (
    Batch,
    ModelConfig,
    ModelParams,
    compute_blob,
    init_params,
    loss_and_grads,
    predict,
    round_f32,
)
from alamp.net.optim import TrainConfig, sgd_step

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Example:
    """One labelled bag: ``patches`` is uint8 ``(M, s, s, 3)``, ``layout`` has 34 entries."""

    patches: np.ndarray
    layout: np.ndarray
    label: int


def stack_examples(examples: Sequence[Example]) -> Batch:
    if not examples:
        raise EmptySet("dataset is empty")
    return Batch(
        layout=np.stack([np.asarray(e.layout, dtype=np.float64) for e in examples]),
        labels=np.array([e.label for e in examples], dtype=np.float64),
        patches=np.stack([e.patches for e in examples]),
    )


def precompute(batch: Batch, params: ModelParams) -> Batch:
    """Replace patches by their features when the extractor has no weights."""
    if params.config.extractor.kind != "handcrafted" or batch.patches is None:
        return batch
    blob = compute_blob(batch.patches, params)[0]
    return Batch(batch.layout, batch.labels, blob=blob)


def train(
    dataset: Sequence[Example] | Batch,
    model_cfg: ModelConfig | None,
    cfg: TrainConfig,
    stage: str,
    init: ModelParams | None = None,
    on_epoch: Callable[[int, float], None] | None = None,
) -> ModelParams:
    """Train one stage and return the final parameters.

    ``mp_only`` starts from a seeded random initialization and feeds a zero
    layout vector. ``fused`` requires the ``mp_only`` result as ``init`` and
    fine-tunes every weight with the layout vector switched on; momentum
    buffers restart from zero. Batches are drawn from a seeded permutation per
    epoch, so the same seed reproduces the run bit for bit. Final tensors are
    rounded to float32 so they survive a checkpoint roundtrip unchanged.
    """
    batch = dataset if isinstance(dataset, Batch) else stack_examples(dataset)
    if len(batch) == 0:
        raise EmptySet("dataset is empty")
    rng = np.random.default_rng(cfg.seed)
    if stage == "mp_only":
        if model_cfg is None:
            raise InvalidInput("mp_only training needs a model config")
        params = init_params(model_cfg, rng, stage="mp_only")
    elif stage == "fused":
        if init is None or init.stage != "mp_only":
            raise MissingStage1Checkpoint("fused training needs an mp_only checkpoint as init")
        if model_cfg is not None and model_cfg != init.config:
            raise InvalidInput("model config differs from the stage-1 checkpoint")
        zeros = {n: np.zeros_like(t) for n, t in init.tensors.items()}
        params = init.with_tensors(dict(init.tensors), zeros, stage="fused")
    else:
        raise InvalidInput(f"unknown stage {stage!r}")

    batch = precompute(batch, params)
    n = len(batch)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grads(params, batch.take(idx))
            params = sgd_step(params, grads, cfg)
            total += loss * len(idx)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise FloatingPointError(f"training diverged at epoch {epoch}")
        log.debug("stage=%s epoch=%d loss=%.6f", stage, epoch, epoch_loss)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss)

    return params.with_tensors(
        {k: round_f32(v) for k, v in params.tensors.items()},
        {k: round_f32(v) for k, v in params.velocity.items()},
    )


def accuracy(params: ModelParams, dataset: Sequence[Example] | Batch) -> float:
    batch = dataset if isinstance(dataset, Batch) else stack_examples(dataset)
    pred = predict(params, precompute(batch, params)) >= 0.5
    return float(np.mean(pred == (batch.labels == 1)))
