"""Repeated solves from random interior points; the best local optimum wins."""

from __future__ import annotations

import numpy as np

from ..nlp import NlpProblem
from .ipm import solve
from .types import SolverOptions, SolveResult


def _random_interior(problem: NlpProblem, rng: np.random.Generator) -> np.ndarray:
    lo, hi = problem.x_lower, problem.x_upper
    finite = np.isfinite(lo) & np.isfinite(hi)
    u = rng.uniform(0.05, 0.95, size=problem.n)
    x = np.array(problem.x0, dtype=float)
    x[finite] = lo[finite] + u[finite] * (hi[finite] - lo[finite])
    only_l = np.isfinite(lo) & ~finite
    only_u = np.isfinite(hi) & ~finite
    x[only_l] = np.maximum(x[only_l], lo[only_l] + u[only_l])
    x[only_u] = np.minimum(x[only_u], hi[only_u] - u[only_u])
    return x


def multistart(problem: NlpProblem, options: SolverOptions | None = None, k: int = 5,
               seed: int = 0) -> tuple[SolveResult, list[SolveResult]]:
    """Solve from ``x0`` and ``k - 1`` random interior points.

    Returns the best locally optimal result (by objective in the problem's
    sense, falling back to the first run) and every run in order.
    """
    rng = np.random.default_rng(seed)
    runs = [solve(problem, options)]
    for _ in range(max(k, 1) - 1):
        runs.append(solve(problem, options, (_random_interior(problem, rng),)))
    ok = [r for r in runs if r.optimal]
    if not ok:
        return runs[0], runs
    pick = max if problem.sense == "maximize" else min
    return pick(ok, key=lambda r: r.objective), runs
