"""Independent recomputation of the KKT residuals of a solve.

Works directly on the original problem (no slacks): rows are checked
against their bounds, inequality-row bound multipliers are recovered from
the sign of the row multiplier, and the same objective/row scaling as the
solver is applied so that the numbers are comparable with its
termination test.
"""

from __future__ import annotations

import numpy as np

from ..nlp import NlpProblem
from .types import KktResiduals, SolveResult


def kkt_residuals(problem: NlpProblem, result: SolveResult, s_max: float = 100.0) -> KktResiduals:
    x = np.asarray(result.x, dtype=float)
    if x.shape != (problem.n,):
        raise ValueError(f"result.x has shape {x.shape}, expected ({problem.n},)")
    meta = result.metadata
    f_scale = float(meta.get("obj_scale", 1.0))
    c_scale = np.asarray(meta.get("con_scale", np.ones(problem.m)), dtype=float)
    sense = 1.0 if problem.sense == "minimize" else -1.0

    # scaled multipliers of the minimization form
    y = -sense * np.asarray(result.lam, dtype=float) * f_scale / c_scale
    zl = np.asarray(result.z_lower, dtype=float) * f_scale
    zu = np.asarray(result.z_upper, dtype=float) * f_scale

    has_xl = np.isfinite(problem.x_lower)
    has_xu = np.isfinite(problem.x_upper)
    ineq = ~problem.equality_rows
    has_gl = ineq & np.isfinite(problem.g_lower)
    has_gu = ineq & np.isfinite(problem.g_upper)
    # slack s = g(x): its multipliers balance the row multiplier
    szl = np.where(has_gl, np.maximum(-y, 0.0), 0.0)
    szu = np.where(has_gu, np.maximum(y, 0.0), 0.0)

    grad = sense * f_scale * np.asarray(problem.gradient(x), dtype=float)
    J = problem.dense_jacobian(x) * c_scale[:, None]
    dual = grad + J.T @ y - zl + zu

    n_bounds = int(has_xl.sum() + has_xu.sum() + has_gl.sum() + has_gu.sum())
    zsum = float(zl[has_xl].sum() + zu[has_xu].sum() + szl.sum() + szu.sum())
    s_d = max(s_max, (float(np.abs(y).sum()) + zsum) / max(problem.m + n_bounds, 1)) / s_max
    s_c = max(s_max, zsum / max(n_bounds, 1)) / s_max

    neg_z = max(float(np.max(-zl[has_xl], initial=0.0)), float(np.max(-zu[has_xu], initial=0.0)), 0.0)
    stationarity = max(float(np.max(np.abs(dual), initial=0.0)) / s_d, neg_z)

    g = np.asarray(problem.constraints(x), dtype=float)
    viol_g = np.maximum(0.0, np.maximum(problem.g_lower - g, g - problem.g_upper))
    viol_g = np.where(np.isfinite(viol_g), viol_g, 0.0) * c_scale
    viol_x = np.maximum(0.0, np.maximum(problem.x_lower - x, x - problem.x_upper))
    viol_x = np.where(np.isfinite(viol_x), viol_x, 0.0)
    feasibility = max(float(np.max(viol_g, initial=0.0)), float(np.max(viol_x, initial=0.0)))

    gs = c_scale * g

    def gap(a, b, mask):
        return np.where(mask, a, 0.0) - np.where(mask, b, 0.0)

    comp = [
        zl * gap(x, problem.x_lower, has_xl),
        zu * gap(problem.x_upper, x, has_xu),
        szl * gap(gs, c_scale * problem.g_lower, has_gl),
        szu * gap(c_scale * problem.g_upper, gs, has_gu),
    ]
    complementarity = max((float(np.max(np.abs(v), initial=0.0)) for v in comp), default=0.0) / s_c
    return KktResiduals(stationarity, feasibility, complementarity)
