"""Options, results and the pluggable solver interface."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, NamedTuple, Protocol, TextIO, runtime_checkable

import numpy as np

from ..nlp import NlpProblem

TOL_ENV = "PETROFLOW_TOL"


class SolveStatus(str, Enum):
    LOCALLY_OPTIMAL = "LocallyOptimal"
    MAX_ITERATIONS = "MaxIterations"
    INFEASIBLE = "Infeasible"
    DIVERGED = "Diverged"

    def __str__(self) -> str:
        return self.value


class KktResiduals(NamedTuple):
    stationarity: float
    feasibility: float
    complementarity: float

    def max(self) -> float:
        return max(self.stationarity, self.feasibility, self.complementarity)


@dataclass
class SolverOptions:
    """Interior-point settings.

    ``tol`` applies to the scaled optimality error; the barrier parameter is
    updated monotonically as ``mu <- max(tol/10, min(kappa_mu*mu, mu**theta_mu))``
    once the barrier subproblem is solved to ``kappa_eps * mu``.
    """

    tol: float = 1e-8
    max_iter: int = 3000
    mu_init: float = 0.1
    tau: float = 0.995
    kappa_mu: float = 0.2
    theta_mu: float = 1.5
    kappa_eps: float = 10.0
    delta_w_floor: float = 1e-8
    delta_w_max: float = 1e40
    delta_c: float = 1e-8
    bound_push: float = 1e-2
    bound_frac: float = 1e-2
    warm_bound_push: float = 1e-6
    warm_mult_push: float = 1e-6
    kappa_sigma: float = 1e10
    s_max: float = 100.0
    max_gradient: float = 100.0
    min_scale: float = 1e-8
    scaling: bool = True
    max_soc: int = 4
    restoration_max_iter: int = 500
    acceptance: str = "filter"
    deterministic: bool = True
    log: TextIO | Callable[[str], Any] | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.mu_init <= 0:
            raise ValueError("mu_init must be positive")
        if self.acceptance != "filter":
            raise ValueError("only the filter line search is implemented")

    @classmethod
    def from_env(cls, **kw) -> "SolverOptions":
        """Options with ``tol`` overridden by ``$PETROFLOW_TOL`` when set."""
        value = os.environ.get(TOL_ENV)
        if value and "tol" not in kw:
            kw["tol"] = float(value)
        return cls(**kw)


@dataclass
class SolveResult:
    """Outcome of one solve.

    ``lam`` is reported in the problem's own sense: for a row with
    right-hand side ``b`` it is ``dF*/db`` where ``F`` is the objective as
    posed (maximized or minimized).  ``z_lower``/``z_upper`` are the
    nonnegative bound multipliers of the equivalent minimization problem.
    """

    status: SolveStatus
    x: np.ndarray
    lam: np.ndarray
    z_lower: np.ndarray
    z_upper: np.ndarray
    objective: float
    iterations: int
    kkt: KktResiduals
    wall_time: float
    metadata: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.LOCALLY_OPTIMAL


@runtime_checkable
class NlpSolver(Protocol):
    """Anything that maps a problem to a :class:`SolveResult`."""

    def solve(self, problem: NlpProblem, options: SolverOptions | None = None,
              warm_start: tuple | None = None) -> SolveResult: ...
