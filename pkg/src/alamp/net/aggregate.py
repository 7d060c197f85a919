"""Orderless statistics over a bag of patch features."""

from __future__ import annotations

import numpy as np

from alamp.errors import EmptyBlob, InvalidInput

STAT_ORDER = ("max", "mean", "min", "median")


def canonical_stats(stats) -> tuple[str, ...]:
    stats = set(stats)
    unknown = stats - set(STAT_ORDER)
    if unknown:
        raise InvalidInput(f"unknown statistics {sorted(unknown)}")
    if not stats:
        raise InvalidInput("statistics set must be nonempty")
    return tuple(u for u in STAT_ORDER if u in stats)


def aggregate_forward(blob: np.ndarray, stats):
    """Apply each statistic over the bag axis of ``blob`` ``(B, M, K)``.

    Returns ``(out (B, U*K), cache)``. Sorting along the bag axis first makes
    every statistic, the mean included, bit-identical under row permutations.
    """
    stats = canonical_stats(stats)
    if blob.ndim != 3 or blob.shape[1] == 0:
        raise EmptyBlob("feature blob must have at least one row")
    b, m, k = blob.shape
    order = np.argsort(blob, axis=1, kind="stable")
    srt = np.take_along_axis(blob, order, axis=1)
    parts = []
    for u in stats:
        if u == "max":
            parts.append(srt[:, -1])
        elif u == "min":
            parts.append(srt[:, 0])
        elif u == "mean":
            parts.append(srt.sum(axis=1, dtype=np.float64) / m)
        else:
            lo, hi = (m - 1) // 2, m // 2
            parts.append(0.5 * (srt[:, lo] + srt[:, hi]))
    return np.concatenate(parts, axis=1), (stats, order, blob.shape)


def aggregate_backward(dout: np.ndarray, cache) -> np.ndarray:
    stats, order, (b, m, k) = cache
    dsorted = np.zeros((b, m, k), dtype=np.float64)
    for s, u in enumerate(stats):
        d = dout[:, s * k:(s + 1) * k]
        if u == "max":
            dsorted[:, -1] += d
        elif u == "min":
            dsorted[:, 0] += d
        elif u == "mean":
            dsorted += d[:, None, :] / m
        else:
            lo, hi = (m - 1) // 2, m // 2
            dsorted[:, lo] += 0.5 * d
            dsorted[:, hi] += 0.5 * d
    dblob = np.zeros_like(dsorted)
    np.put_along_axis(dblob, order, dsorted, axis=1)
    return dblob


def stats_aggregate(blob, stats=("max", "mean")) -> np.ndarray:
    """Aggregate one ``(M, K)`` feature blob to a ``U*K`` vector."""
    blob = np.asarray(blob, dtype=np.float64)
    if blob.ndim != 2 or blob.shape[0] == 0:
        raise EmptyBlob("feature blob must be a nonempty (M, K) matrix")
    return aggregate_forward(blob[None], stats)[0][0]
