"""Elimination of variables whose lower and upper bounds coincide."""

from __future__ import annotations

import numpy as np

from ..nlp import NlpProblem


def reduced_problem(problem: NlpProblem, fixed: np.ndarray) -> tuple[NlpProblem, np.ndarray]:
    """Problem over the free variables with the fixed ones held at their bound."""
    free = np.flatnonzero(~fixed)
    x_full = np.where(fixed, problem.x_lower, problem.x0)
    remap = -np.ones(problem.n, dtype=np.intp)
    remap[free] = np.arange(free.size)

    def expand(z):
        x = x_full.copy()
        x[free] = z
        return x

    jr, jc = problem.jac_structure
    jkeep = ~fixed[jc]
    hr, hc = problem.hess_structure
    hkeep = ~(fixed[hr] | fixed[hc])

    sub = NlpProblem(
        n=free.size, m=problem.m,
        x_lower=problem.x_lower[free], x_upper=problem.x_upper[free],
        g_lower=problem.g_lower, g_upper=problem.g_upper,
        objective=lambda z: problem.objective(expand(z)),
        gradient=lambda z: np.asarray(problem.gradient(expand(z)))[free],
        constraints=lambda z: problem.constraints(expand(z)),
        jacobian=lambda z: np.asarray(problem.jacobian(expand(z)))[jkeep],
        jac_structure=(jr[jkeep], remap[jc[jkeep]]),
        hessian=lambda z, lam, of: np.asarray(problem.hessian(expand(z), lam, of))[hkeep],
        hess_structure=(remap[hr[hkeep]], remap[hc[hkeep]]),
        x0=problem.x0[free], sense=problem.sense,
        var_names=[problem.var_names[i] for i in free] if problem.var_names else None,
        con_names=problem.con_names, row_groups=problem.row_groups,
    )
    return sub, free


def solve_with_fixed(problem, opts, warm_start, record_iterates, solve):
    fixed = np.isfinite(problem.x_lower) & (problem.x_lower == problem.x_upper)
    sub, free = reduced_problem(problem, fixed)
    ws = None
    if warm_start is not None and warm_start[0] is not None:
        ws = [np.asarray(warm_start[0], dtype=float)[free]]
        if len(warm_start) > 1:
            ws.append(warm_start[1])
        if len(warm_start) > 2 and warm_start[2] is not None:
            ws.append((np.asarray(warm_start[2][0])[free], np.asarray(warm_start[2][1])[free]))
        ws = tuple(ws)
    res = solve(sub, opts, ws, record_iterates=record_iterates)
    x = np.where(fixed, problem.x_lower, 0.0)
    x[free] = res.x
    sense = 1.0 if problem.sense == "minimize" else -1.0
    # multipliers of the fixed bounds from stationarity of the minimization form
    grad = sense * np.asarray(problem.gradient(x), dtype=float)
    r = grad + problem.dense_jacobian(x).T @ (-sense * res.lam)
    zl = np.zeros(problem.n)
    zu = np.zeros(problem.n)
    zl[free], zu[free] = res.z_lower, res.z_upper
    zl[fixed] = np.maximum(r[fixed], 0.0)
    zu[fixed] = np.maximum(-r[fixed], 0.0)
    res.x, res.z_lower, res.z_upper = x, zl, zu
    res.metadata["fixed_variables"] = int(fixed.sum())
    res.metadata["free_index"] = free
    return res
