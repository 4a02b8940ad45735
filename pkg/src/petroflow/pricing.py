"""Nodal prices, participant surpluses and bid-price sweeps.

Prices are read from the flow-balance row duals.  The solver reports
``lam = dF/d(rhs)`` for the problem's own objective ``F`` (in $/h) and the
balance row of node ``j`` is ``out - in - s_j + d_j = rhs_j``.  ``sigma_j``
is quoted in $/m3 so that an interior producer or consumer clears at its
own bid:

* F2/F3 maximize value, and ``sigma_j = lam_j / 3600``;
* F1 minimizes cost, and ``sigma_j = -lam_j / 3600`` is the marginal
  pumping cost of serving one more m3 at ``j``.

With a fixed allocation (F1) the balance rows are linearly dependent, so
the prices are determined only up to a common constant; the report says so
through :attr:`NodalPriceReport.unique`.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .formulation import FormulationKind, Objective, allocation_at, build_nlp, objective_terms
from .network import JOULES_PER_KWH, SECONDS_PER_HOUR, Bid, Network, validate_network
from .solver import SolverOptions, SolveResult, SolveStatus, solve


class PricingError(ValueError):
    pass


@dataclass(frozen=True)
class Participant:
    node: str
    role: str  # "producer" | "consumer"
    quantity: float  # m3/h
    bid: float  # $/m3
    surplus: float  # $/h
    interior: bool


@dataclass(frozen=True)
class NodalPriceReport:
    """Prices per node ($/m3) and cleared participants."""

    sigma: dict[str, float]
    participants: tuple[Participant, ...]
    formulation: str
    unique: bool = True

    def participant(self, node: str, role: str) -> Participant:
        for p in self.participants:
            if p.node == node and p.role == role:
                return p
        raise KeyError((node, role))


def _price_sign(kind: FormulationKind) -> float:
    return -1.0 if kind.objective is Objective.MIN_OPERATING_COST else 1.0


def balance_duals(problem, result: SolveResult) -> np.ndarray:
    """Balance-row multipliers of ``result`` in the problem's own sense ($/h per m3/s)."""
    return np.asarray(result.lam)[problem.row_groups["balance"]]


def nodal_prices(net: Network, layout, result: SolveResult, *, problem=None,
                 interior_tol: float = 1e-6) -> NodalPriceReport:
    """Convert the balance duals of an optimal ``result`` into a price report.

    ``interior_tol`` (m3/s) is the distance from both box bounds beyond which
    a cleared quantity counts as interior.
    """
    if result.status is not SolveStatus.LOCALLY_OPTIMAL:
        raise PricingError(f"prices need a LocallyOptimal result, got {result.status.value}")
    kind = layout.kind
    if problem is not None:
        bal = problem.row_groups["balance"]
    else:
        E = len(layout.edge_ids)
        bal = slice(E, E + len(layout.node_ids))
    lam = np.asarray(result.lam)[bal]
    sign = _price_sign(kind)
    sigma = {nid: float(sign * lam[k] / SECONDS_PER_HOUR) for k, nid in enumerate(layout.node_ids)}

    alloc = allocation_at(net, layout, np.asarray(result.x))
    free = kind.free_allocation
    rows: list[Participant] = []

    def add(nid: str, role: str, bid: Bid, q: float):
        price = sigma[nid]
        if role == "producer":
            surplus = (price - bid.price) * q * SECONDS_PER_HOUR
        else:
            surplus = (bid.price - price) * q * SECONDS_PER_HOUR
        interior = free and (q - bid.q_min > interior_tol) and (bid.q_max - q > interior_tol)
        rows.append(Participant(nid, role, q * SECONDS_PER_HOUR, bid.price, surplus, interior))

    for nid in layout.producer_ids:
        add(nid, "producer", net.node(nid).producer, alloc[nid][0])
    for nid in layout.consumer_ids:
        add(nid, "consumer", net.node(nid).consumer, alloc[nid][1])
    return NodalPriceReport(sigma=sigma, participants=tuple(rows), formulation=kind.label,
                            unique=free)


# ---------------------------------------------------------------------------
# parameter paths
# ---------------------------------------------------------------------------

_BID_FIELDS = {"price": 1.0, "q_min": 1.0 / SECONDS_PER_HOUR, "q_max": 1.0 / SECONDS_PER_HOUR}


def parse_path(path: str) -> tuple[str, str, str]:
    """Split ``role:id:field`` and check the field is one we know how to set.

    Accepted forms are ``producer:<node>:{price,q_min,q_max}``,
    ``consumer:<node>:{price,q_min,q_max}`` and
    ``pump:<id>:electricity_price``.  Values are in file units ($/m3, m3/h,
    $/kWh).
    """
    parts = path.split(":")
    if len(parts) != 3:
        raise PricingError(f"parameter path {path!r} must look like role:id:field")
    role, ident, name = parts
    if role in ("producer", "consumer"):
        if name not in _BID_FIELDS:
            raise PricingError(f"unknown bid field {name!r} in {path!r}")
    elif role == "pump":
        if name != "electricity_price":
            raise PricingError(f"unknown pump field {name!r} in {path!r}")
    else:
        raise PricingError(f"unknown role {role!r} in {path!r}")
    return role, ident, name


def apply_parameter(net: Network, path: str, value: float) -> Network:
    """Copy of ``net`` with the parameter at ``path`` set to ``value`` (file units)."""
    role, ident, name = parse_path(path)
    if role == "pump":
        try:
            pump = next(p for p in net.pumps if p.id == ident)
        except StopIteration:
            raise PricingError(f"no pump {ident!r}") from None
        return net.replace_pump(dataclasses.replace(pump, electricity_price=value / JOULES_PER_KWH))
    try:
        node = net.node(ident)
    except KeyError:
        raise PricingError(f"no node {ident!r}") from None
    bid = getattr(node, role)
    if bid is None:
        raise PricingError(f"node {ident!r} has no {role} bid")
    bid = dataclasses.replace(bid, **{name: value * _BID_FIELDS[name]})
    return net.replace_node(dataclasses.replace(node, **{role: bid}))


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    target: str
    values: tuple[float, ...]
    kind: FormulationKind = field(default_factory=FormulationKind.f3)
    warm_start: bool = True

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise PricingError("a sweep needs at least one value")
        if not all(math.isfinite(v) for v in vals):
            raise PricingError("sweep values must be finite")
        object.__setattr__(self, "values", vals)
        parse_path(self.target)


@dataclass
class SweepRow:
    value: float
    status: SolveStatus
    start: str  # "cold" | "warm" | "cold-fallback"
    supply: dict[str, float]  # m3/h
    demand: dict[str, float]
    sigma: dict[str, float]  # $/m3, participant nodes only
    speed: dict[str, float]  # rpm
    efficiency: dict[str, float]
    flow: dict[str, float]  # m3/h, every edge
    J_E: float
    J_O: float
    J_P: float
    iterations: int = 0
    wall_time: float = 0.0
    problem: object = field(default=None, repr=False, compare=False)
    result: SolveResult | None = field(default=None, repr=False, compare=False)

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.LOCALLY_OPTIMAL


@dataclass
class SweepTable:
    spec: SweepSpec
    rows: list[SweepRow]
    producers: tuple[str, ...]
    consumers: tuple[str, ...]
    pumps: tuple[str, ...]
    edges: tuple[str, ...]

    @property
    def optimal_rows(self) -> list[SweepRow]:
        return [r for r in self.rows if r.optimal]

    def column(self, name: str) -> np.ndarray:
        """One numeric column by its CSV header name."""
        k = self.header().index(name)
        return np.array([row[k] for row in self._records()], dtype=float)

    def header(self) -> list[str]:
        price_nodes = list(dict.fromkeys(self.producers + self.consumers))
        return (["value"]
                + [f"s_{n}" for n in self.producers] + [f"d_{n}" for n in self.consumers]
                + [f"sigma_{n}" for n in price_nodes]
                + [f"omega_{p}" for p in self.pumps] + [f"eta_{p}" for p in self.pumps]
                + [f"Q_{e}" for e in self.edges]
                + ["J_E", "J_O", "J_P", "status", "start"])

    def _records(self) -> list[list]:
        price_nodes = list(dict.fromkeys(self.producers + self.consumers))
        out = []
        for r in self.rows:
            out.append([r.value]
                       + [r.supply[n] for n in self.producers] + [r.demand[n] for n in self.consumers]
                       + [r.sigma.get(n, math.nan) for n in price_nodes]
                       + [r.speed[p] for p in self.pumps] + [r.efficiency[p] for p in self.pumps]
                       + [r.flow[e] for e in self.edges]
                       + [r.J_E, r.J_O, r.J_P, r.status.value, r.start])
        return out

    def to_csv(self, dest=None) -> str:
        """CSV text (and optionally write it to ``dest``); floats in ``%.16e``."""
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.header())
        for rec in self._records():
            wr.writerow(["%.16e" % v if isinstance(v, float) else v for v in rec])
        text = buf.getvalue()
        if dest is not None:
            with open(dest, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def _row(net, problem, result, value, start) -> SweepRow:
    lay = problem.layout
    x = np.asarray(result.x)
    terms = objective_terms(net, lay, x)
    E = lay.n_pipes
    alloc = allocation_at(net, lay, x)
    supply = {n: alloc[n][0] * SECONDS_PER_HOUR for n in lay.producer_ids}
    demand = {n: alloc[n][1] * SECONDS_PER_HOUR for n in lay.consumer_ids}
    sigma: dict[str, float] = {}
    if result.optimal:
        report = nodal_prices(net, lay, result, problem=problem)
        sigma = {n: report.sigma[n] for n in dict.fromkeys(lay.producer_ids + lay.consumer_ids)}
    return SweepRow(
        value=value, status=result.status, start=start, supply=supply, demand=demand, sigma=sigma,
        speed={p: float(v) for p, v in zip(lay.pump_ids, x[lay.w])},
        efficiency={p: float(v) for p, v in zip(lay.pump_ids, x[lay.eta])},
        flow={e: float(v) * SECONDS_PER_HOUR for e, v in zip(lay.edge_ids, x[lay.q])},
        J_E=terms.J_E, J_O=terms.J_O, J_P=terms.J_P,
        iterations=result.iterations, wall_time=result.wall_time, problem=problem, result=result,
    )


def sweep(net: Network, spec: SweepSpec, options: SolverOptions | None = None) -> SweepTable:
    """Solve ``spec.kind`` at each parameter value, in order.

    With ``spec.warm_start`` each row starts from the previous optimal row;
    when a warm solve fails the row is re-solved cold.  A row whose solve
    fails keeps its status and the sweep moves on.
    """
    opts = options or SolverOptions()
    rows: list[SweepRow] = []
    prev: SolveResult | None = None
    layout = None
    for value in spec.values:
        mod = apply_parameter(net, spec.target, value)
        errors = [d for d in validate_network(mod) if d.severity == "error"]
        if errors:
            raise PricingError(f"{spec.target}={value}: {errors[0].message}")
        problem = build_nlp(mod, spec.kind)
        layout = problem.layout
        start = "cold"
        if spec.warm_start and prev is not None:
            result = solve(problem, opts, (prev.x, prev.lam, (prev.z_lower, prev.z_upper)))
            start = "warm"
            if not result.optimal:
                result = solve(problem, opts)
                start = "cold-fallback"
        else:
            result = solve(problem, opts)
        rows.append(_row(mod, problem, result, value, start))
        if result.optimal:
            prev = result
    assert layout is not None
    return SweepTable(spec=spec, rows=rows, producers=layout.producer_ids,
                      consumers=layout.consumer_ids, pumps=layout.pump_ids, edges=layout.edge_ids)


def value_range(start: float, stop: float, count: int) -> tuple[float, ...]:
    """``count`` evenly spaced values from ``start`` to ``stop`` inclusive."""
    return tuple(float(v) for v in np.linspace(start, stop, count))


# ---------------------------------------------------------------------------
# finite-difference check of the price
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DualCheck:
    node: str
    sigma: float  # $/m3 from the dual
    fd_price: float  # $/m3 from the finite difference
    relative_error: float
    delta: float  # m3/s
    inconclusive: bool
    reason: str = ""


def _pin_consumer(net: Network, node: str, d: float) -> Network:
    n = net.node(node)
    return net.replace_node(dataclasses.replace(n, consumer=dataclasses.replace(n.consumer, q_min=d, q_max=d)))


def _active_set(problem, result, tol: float) -> frozenset:
    x = np.asarray(result.x)
    lo = np.flatnonzero(np.abs(x - problem.x_lower) <= tol * np.maximum(1.0, np.abs(problem.x_lower)))
    hi = np.flatnonzero(np.abs(problem.x_upper - x) <= tol * np.maximum(1.0, np.abs(problem.x_upper)))
    g = np.asarray(problem.constraints(x))
    ineq = ~problem.equality_rows
    glo = np.flatnonzero(ineq & (np.abs(g - problem.g_lower) <= tol * np.maximum(1.0, np.abs(problem.g_lower))))
    ghi = np.flatnonzero(ineq & (np.abs(problem.g_upper - g) <= tol * np.maximum(1.0, np.abs(problem.g_upper))))
    fixed = problem.x_lower == problem.x_upper
    lo = lo[~fixed[lo]]
    hi = hi[~fixed[hi]]
    return frozenset([("xl", int(i)) for i in lo] + [("xu", int(i)) for i in hi]
                     + [("gl", int(i)) for i in glo] + [("gu", int(i)) for i in ghi])


def dual_consistency_check(net: Network, kind: FormulationKind, node: str, delta: float = 1e-4,
                           options: SolverOptions | None = None, *, active_tol: float = 1e-6) -> DualCheck:
    """Compare ``sigma`` at a consumer node with a finite-difference price.

    The consumer's withdrawal is pinned (both bounds set equal) at its
    optimal value ``d*`` and again at ``d* + delta``.  The finite-difference
    price is the change of the optimal ``J_P`` net of the consumer's own bid
    revenue, i.e. the value of the rest of the system lost per extra m3
    withdrawn at ``node``::

        fd = -(dJ_P - t * delta * 3600) / (delta * 3600)

    For F1 the operating cost replaces ``J_P`` (the fixed allocation is
    shifted instead of the bounds).  The check is *inconclusive* when the
    active set changes between the two pinned solves, the price is zero, or
    the shifted withdrawal has no feasible operating point.
    """
    opts = options or SolverOptions()
    target = net.node(node)
    if target.consumer is None:
        raise PricingError(f"node {node!r} has no consumer bid")

    base_problem = build_nlp(net, kind)
    base = solve(base_problem, opts)
    if not base.optimal:
        raise PricingError(f"base solve failed: {base.status.value}")
    sigma = nodal_prices(net, base_problem.layout, base, problem=base_problem).sigma[node]

    def pinned(d):
        if kind.free_allocation:
            mod = _pin_consumer(net, node, d)
            k = kind
        else:
            alloc = kind.allocation_map()
            s0, _ = alloc.get(node, (0.0, 0.0))
            alloc[node] = (s0, d)
            mod = net
            k = FormulationKind.f1(alloc)
        prob = build_nlp(mod, k)
        res = solve(prob, opts, (base.x, base.lam, (base.z_lower, base.z_upper)))
        if not res.optimal:
            res = solve(prob, opts)
        return prob, res

    lay = base_problem.layout
    if kind.free_allocation:
        d0 = float(base.x[lay.d.start + lay.consumer_ids.index(node)])
    else:
        d0 = kind.allocation_map()[node][1]
    p0, r0 = pinned(d0)
    if not r0.optimal:
        raise PricingError(f"pinned solve at d={d0} failed: {r0.status.value}")
    p1, r1 = pinned(d0 + delta)
    if not r1.optimal:
        # the increment leaves the feasible region: d* is at a capacity limit
        return DualCheck(node=node, sigma=sigma, fd_price=math.nan, relative_error=math.inf, delta=delta,
                         inconclusive=True, reason=f"pinned solve at d*+delta is {r1.status.value}")
    v0 = objective_terms(p0.network, p0.layout, r0.x)
    v1 = objective_terms(p1.network, p1.layout, r1.x)
    if kind.free_allocation:
        dv = (v1.J_P - v0.J_P) - target.consumer.price * delta * SECONDS_PER_HOUR
        fd = -dv / (delta * SECONDS_PER_HOUR)
    else:
        fd = (v1.J_O - v0.J_O) / (delta * SECONDS_PER_HOUR)

    reason = ""
    if _active_set(p0, r0, active_tol) != _active_set(p1, r1, active_tol):
        reason = "active set changes across the increment"
    elif sigma == 0.0:
        reason = "zero price"
    err = abs(fd - sigma) / abs(sigma) if sigma != 0.0 else math.inf
    return DualCheck(node=node, sigma=sigma, fd_price=fd, relative_error=err, delta=delta,
                     inconclusive=bool(reason), reason=reason)


__all__: Sequence[str] = [
    "DualCheck", "NodalPriceReport", "Participant", "PricingError", "SweepRow", "SweepSpec", "SweepTable",
    "apply_parameter", "balance_duals", "dual_consistency_check", "nodal_prices", "parse_path",
    "sweep", "value_range",
]
