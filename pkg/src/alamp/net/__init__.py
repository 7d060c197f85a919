"""Feature extraction, orderless aggregation, fused head and training."""

from alamp.net.aggregate import stats_aggregate
from alamp.net.features import ExtractorSpec, extract_features
from alamp.net.gradcheck import grad_check
from alamp.net.model import (
    Batch,
    ModelConfig,
    ModelParams,
    forward,
    init_params,
    loss_and_grads,
    predict,
    zero_params,
)
from alamp.net.optim import TrainConfig, sgd_step
from alamp.net.train import Example, accuracy, train

__all__ = [
    "Batch",
    "Example",
    "ExtractorSpec",
    "ModelConfig",
    "ModelParams",
    "TrainConfig",
    "accuracy",
    "extract_features",
    "forward",
    "grad_check",
    "init_params",
    "loss_and_grads",
    "predict",
    "sgd_step",
    "stats_aggregate",
    "train",
    "zero_params",
]
