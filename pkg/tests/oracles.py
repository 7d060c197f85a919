"""Independent reference computations used by the tests.

Nothing here imports the code under test except plain data containers, so a
bug in the package cannot leak into its own expected values.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np


def naive_rect_sum(plane, x, y, w, h):
    total = 0.0
    for r in range(y, y + h):
        for c in range(x, x + w):
            total += float(plane[r][c])
    return total


def cov_oracle(samples):
    """Population covariance by explicit double loop."""
    n = len(samples)
    mx = sum(s[0] for s in samples) / n
    my = sum(s[1] for s in samples) / n
    sxx = sum((s[0] - mx) ** 2 for s in samples) / n
    syy = sum((s[1] - my) ** 2 for s in samples) / n
    sxy = sum((s[0] - mx) * (s[1] - my) for s in samples) / n
    return np.array([mx, my]), np.array([[sxx, sxy], [sxy, syy]])


def w2_eig_oracle(m1, c1, m2, c2):
    """W2 via the eigenvalues of ``C1 @ C2``.

    ``C1 C2`` is similar to ``C1^{1/2} C2 C1^{1/2}``, so the trace of the
    latter's square root is the sum of square roots of the former's
    eigenvalues. No matrix square root is formed.
    """
    ev = np.linalg.eigvals(np.asarray(c1) @ np.asarray(c2))
    cross = np.sum(np.sqrt(np.clip(ev.real, 0.0, None)))
    tr = np.trace(c1) + np.trace(c2) - 2.0 * cross
    dm = np.asarray(m1) - np.asarray(m2)
    return math.sqrt(float(dm @ dm) + max(tr, 0.0))


def w2_2x2_oracle(m1, c1, m2, c2):
    """W2 for 2x2 covariances from ``tr sqrt(M) = sqrt(tr M + 2 sqrt(det M))``."""
    tr_m = float(np.trace(c1 @ c2))
    det_m = float(np.linalg.det(c1) * np.linalg.det(c2))
    cross = math.sqrt(max(tr_m + 2.0 * math.sqrt(max(det_m, 0.0)), 0.0))
    tr = float(np.trace(c1) + np.trace(c2)) - 2.0 * cross
    dm = np.asarray(m1) - np.asarray(m2)
    return math.sqrt(float(dm @ dm) + max(tr, 0.0))


def overlap_oracle(a, b):
    """Intersection over the smaller area by pixel-free interval arithmetic."""
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    ix = max(0.0, min(ax0 + aw, bx0 + bw) - max(ax0, bx0))
    iy = max(0.0, min(ay0 + ah, by0 + bh) - max(ay0, by0))
    return ix * iy / min(aw * ah, bw * bh)


def brute_force_select(rects, saliency, edge, chroma, dims, m, tau, lam=(1.0, 1.0, 1.0)):
    """Enumerate every m-subset and return ``(best indices, best value)``.

    ``edge``/``chroma`` are lists of ``(mean, cov)``. Pattern distances use
    the 2x2 trace identity, normalized by the largest pairwise distance.
    Ties keep the lexicographically first subset.
    """
    ls, lp, ld = lam
    n = len(rects)
    dp = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            d = w2_2x2_oracle(*edge[i], *edge[j]) + w2_2x2_oracle(*chroma[i], *chroma[j])
            dp[i][j] = dp[j][i] = d
    dmax = max(max(row) for row in dp)
    diag = math.hypot(*dims)
    centers = [(x + w / 2, y + h / 2) for x, y, w, h in rects]
    best, best_val = None, -math.inf
    for combo in combinations(range(n), m):
        if any(overlap_oracle(rects[a], rects[b]) > tau for a, b in combinations(combo, 2)):
            continue
        val = ls * sum(saliency[i] for i in combo)
        for a, b in combinations(combo, 2):
            val += lp * (dp[a][b] / dmax if dmax > 0 else 0.0)
            val += ld * math.dist(centers[a], centers[b]) / diag
        if val > best_val:
            best, best_val = combo, val
    return best, best_val


def direct_objective(members, dims, dp_max, lam=(1.0, 1.0, 1.0)):
    """Objective of ``members`` given as ``(rect, saliency, edge, chroma)`` tuples."""
    ls, lp, ld = lam
    diag = math.hypot(*dims)
    val = ls * sum(s for _, s, _, _ in members)
    for (r1, _, e1, c1), (r2, _, e2, c2) in combinations(members, 2):
        d = w2_eig_oracle(*e1, *e2) + w2_eig_oracle(*c1, *c2)
        val += lp * (d / dp_max if dp_max > 0 else 0.0)
        c1x, c1y = r1[0] + r1[2] / 2, r1[1] + r1[3] / 2
        c2x, c2y = r2[0] + r2[2] / 2, r2[1] + r2[3] / 2
        val += ld * math.hypot(c1x - c2x, c1y - c2y) / diag
    return val


def saliency_oracle(rgb, sigma):
    """Global-contrast saliency straight from the definition, via scipy-free
    separable Gaussian convolution with reflected borders."""
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    planes = [
        0.299 * r + 0.587 * g + 0.114 * b,
        128 - 0.168736 * r - 0.331264 * g + 0.5 * b,
        128 + 0.5 * r - 0.418688 * g - 0.081312 * b,
    ]
    radius = int(4.0 * sigma + 0.5)
    k = np.exp(-0.5 * (np.arange(-radius, radius + 1) / sigma) ** 2)
    k /= k.sum()

    def blur1d(a, axis):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (radius, radius)
        ap = np.pad(a, pad, mode="symmetric")
        out = np.zeros_like(a)
        for t, wt in enumerate(k):
            sl = [slice(None), slice(None)]
            sl[axis] = slice(t, t + a.shape[axis])
            out += wt * ap[tuple(sl)]
        return out

    d2 = sum((blur1d(blur1d(p, 0), 1) - p.mean()) ** 2 for p in planes)
    c = np.sqrt(d2)
    if c.max() == c.min():
        return np.zeros_like(c)
    return (c - c.min()) / (c.max() - c.min())
