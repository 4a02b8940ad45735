"""Variable-speed centrifugal pump relations.

Head gain follows the quadratic speed-scaled curve ``a0 (w/w_nom)^2 - a1 Q^2``.
Efficiency follows the completed-square form obtained by transporting the
nominal-speed parabola along the affinity line ``Q/Q_nom = w/w_nom``::

    eta = eta_nom - (Q/Q_nom - w/w_nom)^2 * eta_nom * (w_nom/w)^2

which peaks at ``eta_nom`` on the affinity line.  Writing
``r = (Q/Q_nom) * (w_nom/w)`` this is ``eta_nom * (1 - (r - 1)^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .network import JOULES_PER_KWH, SECONDS_PER_HOUR, Fluid, Pump

GRAVITY = 9.80665


@dataclass(frozen=True)
class PumpState:
    flow: float
    speed: float
    efficiency: float
    head_gain: float


def _check_speed(w: float) -> None:
    if w <= 0:
        raise ValueError("pump speed must be positive")


def pump_head_gain(w: float, Q: float, pump: Pump) -> float:
    _check_speed(w)
    s = w / pump.speed_nom
    return pump.a0 * s * s - pump.a1 * Q * Q


def pump_head_gain_partials(w: float, Q: float, pump: Pump) -> tuple[float, float]:
    """(d/dQ, d/dw) of :func:`pump_head_gain`."""
    _check_speed(w)
    return -2.0 * pump.a1 * Q, 2.0 * pump.a0 * w / pump.speed_nom**2


def pump_efficiency(Q: float, w: float, pump: Pump) -> float:
    _check_speed(w)
    if Q < 0:
        raise ValueError("pump flow must be nonnegative")
    r = (Q / pump.q_nom) * (pump.speed_nom / w)
    return pump.eff_nom * (1.0 - (r - 1.0) ** 2)


def pump_efficiency_partials(Q: float, w: float, pump: Pump) -> tuple[float, float]:
    """(d/dQ, d/dw) of :func:`pump_efficiency`."""
    _check_speed(w)
    r = (Q / pump.q_nom) * (pump.speed_nom / w)
    g = -2.0 * pump.eff_nom * (r - 1.0)
    return g * pump.speed_nom / (pump.q_nom * w), -g * r / w


def affinity_flow(w: float, pump: Pump) -> float:
    """Flow at which the pump runs at nominal efficiency for speed ``w``."""
    return pump.q_nom * w / pump.speed_nom


def pump_power(Q: float, head_gain: float, eta: float, fluid: Fluid, pump: Pump) -> float:
    """Electrical power drawn, in W."""
    if eta <= 0 or pump.motor_eff <= 0 or pump.transmission_eff <= 0:
        raise ValueError("efficiencies must be positive")
    return fluid.density * GRAVITY * Q * head_gain / (eta * pump.motor_eff * pump.transmission_eff)


def pump_cost_rate(power: float, price_per_kwh: float) -> float:
    """Electricity cost in $/h for ``power`` W at ``price_per_kwh`` $/kWh."""
    return power * (SECONDS_PER_HOUR / JOULES_PER_KWH) * price_per_kwh


def price_per_kwh(pump: Pump) -> float:
    return pump.electricity_price * JOULES_PER_KWH
