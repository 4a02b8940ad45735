import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from petroflow.formulation import FormulationKind, build_nlp  # noqa: E402
from petroflow.seaway import load_f1_allocation, load_seaway  # noqa: E402
from petroflow.solver import SolverOptions, kkt_residuals, solve  # noqa: E402

AUDIT_TOL = 1e-7
BALANCE_TOL = 1e-9


def assert_audited(problem, result):
    """KKT audit and supply/demand conservation for an optimal result."""
    assert result.optimal, result.status
    kkt = kkt_residuals(problem, result)
    assert kkt.max() <= AUDIT_TOL, kkt
    lay = problem.layout
    if lay.kind.free_allocation:
        imbalance = np.sum(result.x[lay.s]) - np.sum(result.x[lay.d])
        assert abs(imbalance) <= BALANCE_TOL
    return kkt


@pytest.fixture(scope="session")
def seaway():
    return load_seaway()


@pytest.fixture(scope="session")
def f1_allocation():
    return load_f1_allocation()


@pytest.fixture(scope="session")
def seaway_kinds(f1_allocation):
    return {"f1": FormulationKind.f1(f1_allocation), "f2": FormulationKind.f2(), "f3": FormulationKind.f3()}


@pytest.fixture(scope="session")
def seaway_solutions(seaway, seaway_kinds):
    """Cold solves of the shipped case: label -> (problem, result)."""
    out = {}
    for label, kind in seaway_kinds.items():
        problem = build_nlp(seaway, kind)
        out[label] = (problem, solve(problem, SolverOptions()))
    return out
