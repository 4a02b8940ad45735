"""Interior-point NLP solver with constraint and bound duals."""

from .audit import kkt_residuals
from .ipm import LOG_HEADER, compute_scaling, solve
from .multistart import multistart
from .types import KktResiduals, NlpSolver, SolverOptions, SolveResult, SolveStatus


class InteriorPointSolver:
    """Reference :class:`NlpSolver` implementation."""

    def solve(self, problem, options=None, warm_start=None) -> SolveResult:
        return solve(problem, options, warm_start)


__all__ = [
    "InteriorPointSolver", "KktResiduals", "LOG_HEADER", "NlpSolver", "SolveResult", "SolveStatus",
    "SolverOptions", "compute_scaling", "kkt_residuals", "multistart", "solve",
]
