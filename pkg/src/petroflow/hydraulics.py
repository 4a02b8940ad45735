"""Steady pipe-flow physics: Reynolds number, friction regimes, Leibenzon head loss."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .network import Pipe

LEIBENZON_FACTOR = 1.02
# Below this flow the power law Q**(2-m) is replaced by a C1 quadratic stub.
FLOW_EPS = 1e-12


def reynolds(Q: float, D: float, nu: float) -> float:
    if D <= 0 or nu <= 0:
        raise ValueError("diameter and viscosity must be positive")
    return 4.0 * Q / (math.pi * D * nu)


def friction_factor(Re: float, rel_roughness: float, conventional_rough_limit: bool = False) -> float:
    """Hydraulic resistance coefficient for the Stokes/Blasius/Altshul/Shifrinson regimes.

    The rough-regime threshold is ``Re > 500 * rel_roughness`` as commonly
    quoted in the Russian pipeline literature; with
    ``conventional_rough_limit=True`` it becomes ``Re > 500 / rel_roughness``.
    Only used for reporting, never inside the optimization.
    """
    if Re <= 0 or rel_roughness <= 0:
        raise ValueError("Re and relative roughness must be positive")
    if Re < 2320.0:
        return 64.0 / Re
    if Re < 1e5:
        return 0.3164 / Re**0.25
    rough_limit = 500.0 / rel_roughness if conventional_rough_limit else 500.0 * rel_roughness
    if Re < rough_limit:
        return 0.11 * (68.0 / Re + rel_roughness) ** 0.25
    return 0.11 * rel_roughness**0.25


def flow_regime(Re: float, rel_roughness: float, conventional_rough_limit: bool = False) -> str:
    if Re < 2320.0:
        return "laminar"
    if Re < 1e5:
        return "smooth"
    rough_limit = 500.0 / rel_roughness if conventional_rough_limit else 500.0 * rel_roughness
    return "transition" if Re < rough_limit else "rough"


def leibenzon_coefficient(nu: float, D: float, m_exp: float, beta: float) -> float:
    """Factor ``k`` such that the friction gradient is ``k * Q**(2 - m)``."""
    if D <= 0 or nu <= 0:
        raise ValueError("diameter and viscosity must be positive")
    return LEIBENZON_FACTOR * beta * nu**m_exp / D ** (5.0 - m_exp)


def flow_power(Q: float, m_exp: float) -> tuple[float, float, float]:
    """``Q**(2-m)`` with its first and second derivative, smoothed near zero.

    Negative flows are clamped to zero.
    """
    if Q <= 0.0:
        return 0.0, 0.0, 0.0
    if Q < FLOW_EPS:
        a = (1.0 - m_exp) * FLOW_EPS**-m_exp
        b = m_exp * FLOW_EPS ** (1.0 - m_exp)
        return a * Q * Q + b * Q, 2.0 * a * Q + b, 2.0 * a
    p = math.exp((1.0 - m_exp) * math.log(Q))  # Q**(1-m)
    return Q * p, (2.0 - m_exp) * p, (2.0 - m_exp) * (1.0 - m_exp) * p / Q


def leibenzon_gradient(Q: float, nu: float, D: float, m_exp: float, beta: float) -> float:
    """Friction head loss per metre of pipe, ``1.02 beta Q^(2-m) nu^m / D^(5-m)``."""
    if Q < 0:
        raise ValueError("flow must be nonnegative")
    k = leibenzon_coefficient(nu, D, m_exp, beta)
    return k * flow_power(Q, m_exp)[0]


@dataclass(frozen=True)
class PipeResidualDerivatives:
    value: float
    d_dHi: float
    d_dHj: float
    d_dQ: float
    d2_dQ2: float = 0.0


def pipe_residual(H_i: float, H_j: float, Q: float, pipe: Pipe, z_i: float, z_j: float,
                  nu: float) -> PipeResidualDerivatives:
    """Bernoulli balance ``(H_i - H_j) - (z_j - z_i) - friction(Q) * L`` and its partials."""
    k = leibenzon_coefficient(nu, pipe.diameter, pipe.flow_exponent, pipe.beta) * pipe.length
    q, dq, d2q = flow_power(Q, pipe.flow_exponent)
    value = (H_i - H_j) - (z_j - z_i) - k * q
    return PipeResidualDerivatives(value=value, d_dHi=1.0, d_dHj=-1.0, d_dQ=-k * dq, d2_dQ2=-k * d2q)
