"""Bivariate Gaussian pattern models and the Wasserstein pattern distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from alamp.errors import EmptySamples, NonPSDInput
from alamp.imaging import PlaneSet, Rect, crop

COV_FLOOR = 1e-6
_TRACE_CLAMP = 1e-10


@dataclass(frozen=True, eq=False)
class Gaussian2:
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True, eq=False)
class PatternModel:
    edge: Gaussian2
    chroma: Gaussian2


def fit_gaussian2(samples, eps: float = COV_FLOOR) -> Gaussian2:
    """Sample mean and population covariance (plus ``eps * I``) of 2-D samples."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
    if x.shape[0] == 0:
        raise EmptySamples("cannot fit a Gaussian to zero samples")
    mean = x.mean(axis=0)
    d = x - mean
    cov = d.T @ d / x.shape[0]
    cov = 0.5 * (cov + cov.T) + eps * np.eye(2)
    mean.flags.writeable = False
    cov.flags.writeable = False
    return Gaussian2(mean, cov)


def _sym_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(a)
    if w.min() < -_TRACE_CLAMP:
        raise NonPSDInput(f"matrix has negative eigenvalue {w.min():.3e}")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def _cross_trace(a: np.ndarray, b: np.ndarray) -> float:
    sa = _sym_sqrt(a)
    m = sa @ b @ sa
    return float(np.trace(_sym_sqrt(0.5 * (m + m.T))))


def gaussian_w2(a: Gaussian2, b: Gaussian2) -> float:
    """Closed-form 2-Wasserstein distance between two Gaussians."""
    if np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov):
        # the trace residue would otherwise surface as ~1e-8 after the sqrt
        return 0.0
    # averaging both orderings makes the result exactly symmetric
    cross = 0.5 * (_cross_trace(a.cov, b.cov) + _cross_trace(b.cov, a.cov))
    tr = np.trace(a.cov) + np.trace(b.cov) - 2.0 * cross
    if tr < 0.0:
        if tr < -_TRACE_CLAMP * max(1.0, np.trace(a.cov) + np.trace(b.cov)):
            raise NonPSDInput(f"negative covariance term {tr:.3e}")
        tr = 0.0
    dm = a.mean - b.mean
    return float(np.sqrt(dm @ dm + tr))


def pairwise_w2(means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """All-pairs :func:`gaussian_w2` for ``n`` Gaussians as an ``(n, n)`` matrix.

    Same closed form as the scalar routine, batched through ``eigh``.
    """
    means = np.asarray(means, dtype=np.float64)
    covs = np.asarray(covs, dtype=np.float64)
    w, v = np.linalg.eigh(covs)
    if w.size and w.min() < -_TRACE_CLAMP:
        raise NonPSDInput("covariance with negative eigenvalue")
    roots = (v * np.sqrt(np.clip(w, 0.0, None))[:, None, :]) @ np.swapaxes(v, 1, 2)
    inner = roots[:, None] @ covs[None, :] @ roots[:, None]
    inner = 0.5 * (inner + np.swapaxes(inner, -1, -2))
    iw = np.linalg.eigvalsh(inner)
    cross_tr = np.sqrt(np.clip(iw, 0.0, None)).sum(axis=-1)
    cross_tr = 0.5 * (cross_tr + cross_tr.T)
    traces = np.trace(covs, axis1=1, axis2=2)
    tr = traces[:, None] + traces[None, :] - 2.0 * cross_tr
    tr = np.where(tr < 0.0, 0.0, tr)
    dm = means[:, None, :] - means[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", dm, dm) + tr)
    same = (dm == 0).all(axis=-1) & (covs[:, None] == covs[None, :]).all(axis=(-1, -2))
    d[same] = 0.0
    return d


def patch_pattern(planes: PlaneSet, r: Rect) -> PatternModel:
    edge = np.stack([crop(planes.gx, r).ravel(), crop(planes.gy, r).ravel()], axis=1)
    chroma = np.stack([crop(planes.cb, r).ravel(), crop(planes.cr, r).ravel()], axis=1)
    return PatternModel(fit_gaussian2(edge), fit_gaussian2(chroma))


def pattern_distance(m1: PatternModel, m2: PatternModel) -> float:
    return gaussian_w2(m1.edge, m2.edge) + gaussian_w2(m1.chroma, m2.chroma)


def pairwise_pattern_distance(models: list[PatternModel]) -> np.ndarray:
    edge = pairwise_w2(
        np.array([m.edge.mean for m in models]), np.array([m.edge.cov for m in models])
    )
    chroma = pairwise_w2(
        np.array([m.chroma.mean for m in models]), np.array([m.chroma.cov for m in models])
    )
    return edge + chroma
