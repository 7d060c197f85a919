"""Central-difference verification of the analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from alamp.net.model import Batch, ModelParams, loss_and_grads, loss_only, perturbed


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    checked: int
    skipped: int

    def __float__(self) -> float:
        return self.max_rel_error


def _same_signature(a, b) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(
    params: ModelParams,
    batch: Batch,
    h: float = 1e-4,
    n_coords: int = 200,
    rng: np.random.Generator | None = None,
    max_attempts: int | None = None,
) -> GradCheckReport:
    """Compare analytic gradients with ``(f(p+h) - f(p-h)) / 2h`` on random coordinates.

    A coordinate is skipped when either perturbation changes any ReLU mask,
    pooling winner or statistic ordering, i.e. when the two probes straddle a
    kink. Sampling continues until ``n_coords`` coordinates were compared.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    max_attempts = 20 * n_coords if max_attempts is None else max_attempts
    _, grads, sig0 = loss_and_grads(params, batch, with_signature=True)
    names = params.names()
    sizes = np.array([params.tensors[n].size for n in names])
    bounds = np.cumsum(sizes)
    worst, checked, skipped = 0.0, 0, 0
    for _ in range(max_attempts):
        if checked >= n_coords:
            break
        flat = int(rng.integers(bounds[-1]))
        k = int(np.searchsorted(bounds, flat, side="right"))
        name, idx = names[k], flat - (bounds[k - 1] if k else 0)
        f_plus, sig_plus = loss_only(perturbed(params, name, idx, h), batch)
        f_minus, sig_minus = loss_only(perturbed(params, name, idx, -h), batch)
        if not (_same_signature(sig0, sig_plus) and _same_signature(sig0, sig_minus)):
            skipped += 1
            continue
        numeric = (f_plus - f_minus) / (2.0 * h)
        analytic = float(grads[name].flat[idx])
        err = abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))
        worst = max(worst, err)
        checked += 1
    return GradCheckReport(worst, checked, skipped)
