"""Candidate patch generation and the patch-subset selection problem.

The objective rewards salient patches, pattern diversity between patches and
spatial spread:

    F(P) = ls * sum_i S_i + lp * sum_{i<j} Dp_ij / max(Dp) + ld * sum_{i<j} |c_i - c_j| / diag

subject to every pairwise overlap ratio being at most ``tau_overlap``.
Three solvers are provided: exhaustive enumeration, greedy, and best-swap
local search.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from itertools import combinations

import numpy as np

from alamp.errors import (
    EmptySet,
    InvalidInput,
    NoFeasibleSet,
    TooManyCombinations,
    WindowTooLarge,
    ZeroStride,
)
from alamp.imaging import PlaneSet, Rect
from alamp.layout import rect_overlap_ratio
from alamp.pattern import PatternModel, pairwise_pattern_distance, patch_pattern
from alamp.saliency import SaliencyMap, patch_saliency

MAX_COMBINATIONS = 10**6
SOLVERS = ("exhaustive", "greedy", "local_search")


@dataclass(frozen=True)
class SelectorConfig:
    m: int = 5
    window: int = 224
    stride: int = 112
    lambda_s: float = 1.0
    lambda_p: float = 1.0
    lambda_d: float = 1.0
    tau_overlap: float = 0.3

    def __post_init__(self):
        if self.m < 1:
            raise InvalidInput("m must be >= 1")
        if self.window < 1:
            raise InvalidInput("window must be >= 1")
        if self.stride < 1:
            raise ZeroStride("stride must be >= 1")
        if min(self.lambda_s, self.lambda_p, self.lambda_d) < 0:
            raise InvalidInput("term weights must be nonnegative")
        if not 0.0 <= self.tau_overlap <= 1.0:
            raise InvalidInput("tau_overlap must lie in [0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "SelectorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidInput(f"unknown selector options: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Candidate:
    rect: Rect
    center: tuple[float, float]
    saliency: float
    pattern: PatternModel


@dataclass(frozen=True, eq=False)
class PatchSet:
    members: tuple[Candidate, ...]
    indices: tuple[int, ...]
    objective: float
    solver: str

    def to_json(self, image: str, window: int) -> dict:
        return {
            "image": image,
            "window": window,
            "members": [{**c.rect.as_dict(), "saliency": c.saliency} for c in self.members],
            "objective": self.objective,
            "solver": self.solver,
        }


def grid_positions(extent: int, window: int, stride: int) -> list[int]:
    pos = list(range(0, extent - window + 1, stride))
    if pos[-1] != extent - window:
        pos.append(extent - window)
    return pos


def generate_candidates(dims, cfg: SelectorConfig, smap: SaliencyMap, planes: PlaneSet) -> list[Candidate]:
    width, height = dims
    if cfg.stride < 1:
        raise ZeroStride("stride must be >= 1")
    if cfg.window > min(width, height):
        raise WindowTooLarge(f"window {cfg.window} exceeds image {width}x{height}")
    cands = []
    for y in grid_positions(height, cfg.window, cfg.stride):
        for x in grid_positions(width, cfg.window, cfg.stride):
            r = Rect(x, y, cfg.window, cfg.window)
            cands.append(Candidate(r, r.center, patch_saliency(smap, r), patch_pattern(planes, r)))
    return cands


class SelectionProblem:
    """Candidate pool with precomputed pairwise terms, shared by all solvers.

    ``pair[i, j]`` holds the weighted, normalized pattern and spread terms for
    the pair; ``feasible[i, j]`` is the overlap constraint.
    """

    def __init__(self, cands: list[Candidate], cfg: SelectorConfig, dims):
        if not cands:
            raise EmptySet("candidate pool is empty")
        self.cands = list(cands)
        self.cfg = cfg
        width, height = dims
        self.diagonal = math.hypot(width, height)
        n = len(cands)
        self.saliency = np.array([c.saliency for c in cands], dtype=np.float64)

        dp = pairwise_pattern_distance([c.pattern for c in cands]) if n > 1 else np.zeros((1, 1))
        self.dp_max = float(dp.max())
        dp_hat = dp / self.dp_max if self.dp_max > 0 else np.zeros_like(dp)

        centers = np.array([c.center for c in cands], dtype=np.float64)
        diff = centers[:, None, :] - centers[None, :, :]
        ds_hat = np.sqrt((diff**2).sum(axis=-1)) / self.diagonal

        self.pair = cfg.lambda_p * dp_hat + cfg.lambda_d * ds_hat
        self.unary = cfg.lambda_s * self.saliency
        self.feasible = np.ones((n, n), dtype=bool)
        for i, j in combinations(range(n), 2):
            ok = rect_overlap_ratio(cands[i].rect, cands[j].rect) <= cfg.tau_overlap
            self.feasible[i, j] = self.feasible[j, i] = ok

    def __len__(self) -> int:
        return len(self.cands)

    def objective(self, idx) -> float:
        idx = sorted(idx)
        if not idx:
            raise EmptySet("objective of an empty set")
        total = float(self.unary[idx].sum())
        for a, b in combinations(idx, 2):
            total += float(self.pair[a, b])
        return total

    def is_feasible(self, idx) -> bool:
        return all(self.feasible[a, b] for a, b in combinations(idx, 2))

    def patch_set(self, idx, solver: str) -> PatchSet:
        idx = tuple(sorted(int(i) for i in idx))
        return PatchSet(tuple(self.cands[i] for i in idx), idx, self.objective(idx), solver)


def objective(problem: SelectionProblem, idx) -> float:
    return problem.objective(idx)


def select_exhaustive(problem: SelectionProblem) -> PatchSet:
    n, m = len(problem), problem.cfg.m
    if m > n:
        raise NoFeasibleSet(f"need {m} patches but only {n} candidates")
    if math.comb(n, m) > MAX_COMBINATIONS:
        raise TooManyCombinations(f"C({n}, {m}) exceeds {MAX_COMBINATIONS}")
    combos = np.array(list(combinations(range(n), m)), dtype=np.intp).reshape(-1, m)
    scores = problem.unary[combos].sum(axis=1)
    ok = np.ones(len(combos), dtype=bool)
    for a, b in combinations(range(m), 2):
        scores = scores + problem.pair[combos[:, a], combos[:, b]]
        ok &= problem.feasible[combos[:, a], combos[:, b]]
    if not ok.any():
        raise NoFeasibleSet("no subset satisfies the overlap constraint")
    scores = np.where(ok, scores, -np.inf)
    # argmax returns the first maximum, i.e. the lexicographically smallest subset
    return problem.patch_set(combos[int(np.argmax(scores))], "exhaustive")


def _gains(problem: SelectionProblem, chosen: list[int]) -> np.ndarray:
    g = problem.unary.copy()
    for c in chosen:
        g += problem.pair[c]
    return g


def select_greedy(problem: SelectionProblem) -> PatchSet:
    """Add the feasible candidate with the largest marginal gain until ``m``.

    On a dead end (no feasible addition left) the search backtracks to the
    next-best choice at the deepest level, so a feasible set is found whenever
    one exists. Without dead ends this is plain greedy.
    """
    n, m = len(problem), problem.cfg.m
    if m > n:
        raise NoFeasibleSet(f"need {m} patches but only {n} candidates")

    def extend(chosen: list[int], allowed: np.ndarray):
        if len(chosen) == m:
            return chosen
        gains = _gains(problem, chosen)
        order = [int(i) for i in np.argsort(-gains, kind="stable") if allowed[i]]
        for c in order:
            found = extend(chosen + [c], allowed & problem.feasible[c] & (np.arange(n) != c))
            if found is not None:
                return found
        return None

    start = np.ones(n, dtype=bool)
    found = extend([], start)
    if found is None:
        raise NoFeasibleSet("no subset satisfies the overlap constraint")
    return problem.patch_set(found, "greedy")


def select_local_search(problem: SelectionProblem, seed: PatchSet, tol: float = 1e-12) -> PatchSet:
    """Apply the best improving single swap until none improves the objective."""
    current = list(seed.indices)
    if not problem.is_feasible(current):
        raise InvalidInput("local search seed violates the overlap constraint")
    value = problem.objective(current)
    n = len(problem)
    while True:
        best_value, best_swap = value, None
        members = set(current)
        for pos in range(len(current)):
            rest = current[:pos] + current[pos + 1:]
            for c in range(n):
                if c in members or not all(problem.feasible[c, r] for r in rest):
                    continue
                v = problem.objective(rest + [c])
                if v > best_value + tol * max(1.0, abs(best_value)):
                    best_value, best_swap = v, (pos, c)
        if best_swap is None:
            break
        pos, c = best_swap
        current[pos] = c
        value = best_value
    return problem.patch_set(current, "local_search")


def select(problem: SelectionProblem, solver: str = "local_search") -> PatchSet:
    """Run ``solver``; ``local_search`` is seeded from the greedy solution."""
    if solver == "exhaustive":
        return select_exhaustive(problem)
    if solver == "greedy":
        return select_greedy(problem)
    if solver == "local_search":
        return select_local_search(problem, select_greedy(problem))
    raise InvalidInput(f"unknown solver {solver!r}; expected one of {SOLVERS}")
