"""Heavy-ball SGD with L2 weight decay folded into the gradient."""

from __future__ import annotations

from dataclasses import dataclass

from alamp.errors import InvalidInput, ShapeMismatch


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    weight_decay: float = 1e-5
    momentum: float = 0.9
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise InvalidInput("lr must be > 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidInput("epochs must be >= 0 and batch_size >= 1")


def sgd_step(params, grads: dict, cfg: TrainConfig):
    """One update: ``g' = g + wd*p``, ``v' = mu*v + g'``, ``p' = p - lr*v'``.

    Returns a new :class:`~alamp.net.model.ModelParams`; ``params`` is untouched.
    """
    tensors, velocity = {}, {}
    for name, p in params.tensors.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: gradient shape {g.shape} != {p.shape}")
        g = g + cfg.weight_decay * p
        v = cfg.momentum * params.velocity[name] + g
        velocity[name] = v
        tensors[name] = p - cfg.lr * v
    return params.with_tensors(tensors, velocity)

