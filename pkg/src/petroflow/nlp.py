"""Standard-form nonlinear program::

    max/min f(x)   s.t.  g_lower <= g(x) <= g_upper,   x_lower <= x <= x_upper

Equality rows have ``g_lower == g_upper``.  Derivatives are given in
coordinate (COO) form with a structure that never changes; duplicate
entries are summed.  The Hessian callback returns the lower triangle of
``obj_factor * hess f(x) + sum_k lam[k] * hess g_k(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class NlpProblem:
    n: int
    m: int
    x_lower: np.ndarray
    x_upper: np.ndarray
    g_lower: np.ndarray
    g_upper: np.ndarray
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    constraints: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    jac_structure: tuple[np.ndarray, np.ndarray]
    hessian: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    hess_structure: tuple[np.ndarray, np.ndarray]
    x0: np.ndarray
    sense: str = "minimize"
    var_names: list[str] | None = None
    con_names: list[str] | None = None
    row_groups: dict[str, slice] = field(default_factory=dict)

    def __post_init__(self):
        if self.sense not in ("minimize", "maximize"):
            raise ValueError("sense must be 'minimize' or 'maximize'")
        for name in ("x_lower", "x_upper", "g_lower", "g_upper", "x0"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.jac_structure = tuple(np.asarray(a, dtype=np.intp) for a in self.jac_structure)
        self.hess_structure = tuple(np.asarray(a, dtype=np.intp) for a in self.hess_structure)
        hr, hc = self.hess_structure
        if np.any(hr < hc):
            raise ValueError("Hessian structure must be lower triangular (row >= col)")

    @property
    def equality_rows(self) -> np.ndarray:
        return self.g_lower == self.g_upper

    def dense_jacobian(self, x: np.ndarray) -> np.ndarray:
        J = np.zeros((self.m, self.n))
        r, c = self.jac_structure
        np.add.at(J, (r, c), self.jacobian(x))
        return J

    def dense_hessian(self, x: np.ndarray, lam: np.ndarray, obj_factor: float = 1.0) -> np.ndarray:
        H = np.zeros((self.n, self.n))
        r, c = self.hess_structure
        v = self.hessian(x, lam, obj_factor)
        np.add.at(H, (r, c), v)
        off = r != c
        np.add.at(H, (c[off], r[off]), v[off])
        return H

    @classmethod
    def from_dense(cls, n, m, f, grad, g, jac, hess, x_lower, x_upper, g_lower, g_upper,
                   x0, sense="minimize", **kw) -> "NlpProblem":
        """Build a problem from dense callables (small test problems).

        ``jac(x)`` returns an ``(m, n)`` array and ``hess(x, lam, obj_factor)``
        a symmetric ``(n, n)`` array.
        """
        jr, jc = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
        hr, hc = np.tril_indices(n)
        return cls(
            n=n, m=m, x_lower=x_lower, x_upper=x_upper, g_lower=g_lower, g_upper=g_upper,
            objective=f, gradient=lambda x: np.asarray(grad(x), dtype=float),
            constraints=lambda x: np.asarray(g(x), dtype=float).reshape(m),
            jacobian=lambda x: np.asarray(jac(x), dtype=float).reshape(m, n).ravel(),
            jac_structure=(jr.ravel(), jc.ravel()),
            hessian=lambda x, lam, of: np.asarray(hess(x, lam, of), dtype=float)[hr, hc],
            hess_structure=(hr, hc), x0=x0, sense=sense, **kw,
        )
