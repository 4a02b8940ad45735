"""Assembly of the three pipeline operation problems as standard-form NLPs.

* F1 (``min_operating_cost``): allocations fixed, minimize pumping cost ``J_O``.
* F2 (``max_transport_value``): allocations free, maximize ``J_E``.
* F3 (``max_total_value``): allocations free, maximize ``J_P = J_E - J_O``.

Objectives are in $/h.  Constraint rows, in order: one Bernoulli row per
pipe, one flow-balance row per node, one head row and one efficiency row per
pump, and one ranged head-difference row per pump.

The flow-balance row of node j reads ``sum_out Q - sum_in Q - s_j + d_j = b_j``
with ``b_j`` the exogenous injection (zero, or ``s_j - d_j`` when the
allocation is fixed).  Its multiplier, in the maximize-sense convention of
the solver, is therefore the objective gain per m^3/s injected at j.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

from . import kernels
from .hydraulics import leibenzon_coefficient
from .network import SECONDS_PER_HOUR, Network, validate_network
from .nlp import NlpProblem
from .pumps import GRAVITY


class FormulationError(ValueError):
    pass


class Objective(str, Enum):
    MIN_OPERATING_COST = "f1"
    MAX_TRANSPORT_VALUE = "f2"
    MAX_TOTAL_VALUE = "f3"


@dataclass(frozen=True)
class FormulationKind:
    """Which problem to build; F1 carries the fixed allocation (node -> (s, d) in m^3/s)."""

    objective: Objective
    fixed_allocation: tuple[tuple[str, float, float], ...] | None = None

    @classmethod
    def f1(cls, allocation: Mapping[str, tuple[float, float]]) -> "FormulationKind":
        items = tuple((nid, float(s), float(d)) for nid, (s, d) in allocation.items())
        return cls(Objective.MIN_OPERATING_COST, items)

    @classmethod
    def f2(cls) -> "FormulationKind":
        return cls(Objective.MAX_TRANSPORT_VALUE)

    @classmethod
    def f3(cls) -> "FormulationKind":
        return cls(Objective.MAX_TOTAL_VALUE)

    @classmethod
    def parse(cls, name: str, allocation=None) -> "FormulationKind":
        name = name.lower()
        if name == "f1":
            if allocation is None:
                raise FormulationError("f1 requires a fixed allocation")
            return cls.f1(allocation)
        if name == "f2":
            return cls.f2()
        if name == "f3":
            return cls.f3()
        raise FormulationError(f"unknown formulation {name!r}")

    @property
    def free_allocation(self) -> bool:
        return self.objective is not Objective.MIN_OPERATING_COST

    @property
    def label(self) -> str:
        return self.objective.value

    def allocation_map(self) -> dict[str, tuple[float, float]]:
        return {nid: (s, d) for nid, s, d in (self.fixed_allocation or ())}


@dataclass(frozen=True)
class VariableLayout:
    """Index ranges of each variable family; ranges are contiguous and disjoint."""

    kind: FormulationKind
    q: slice  # pipes then pumps, declaration order
    h: slice
    w: slice
    eta: slice
    s: slice
    d: slice
    n: int
    edge_ids: tuple[str, ...]
    node_ids: tuple[str, ...]
    pump_ids: tuple[str, ...]
    producer_ids: tuple[str, ...]
    consumer_ids: tuple[str, ...]
    n_pipes: int = 0

    def q_index(self, edge_id: str) -> int:
        return self.q.start + self.edge_ids.index(edge_id)

    def h_index(self, node_id: str) -> int:
        return self.h.start + self.node_ids.index(node_id)

    def names(self) -> list[str]:
        out = [f"Q[{e}]" for e in self.edge_ids]
        out += [f"H[{j}]" for j in self.node_ids]
        out += [f"w[{p}]" for p in self.pump_ids]
        out += [f"eta[{p}]" for p in self.pump_ids]
        out += [f"s[{j}]" for j in self.producer_ids if self.s.stop > self.s.start]
        out += [f"d[{j}]" for j in self.consumer_ids if self.d.stop > self.d.start]
        return out


def build_layout(net: Network, kind: FormulationKind) -> VariableLayout:
    errors = [d for d in validate_network(net) if d.severity == "error"]
    if errors:
        raise FormulationError("invalid network: " + "; ".join(map(str, errors)))
    E, P, N = len(net.pipes), len(net.pumps), len(net.nodes)
    prods = tuple(n.id for n in net.producers)
    cons = tuple(n.id for n in net.consumers)
    n_s = len(prods) if kind.free_allocation else 0
    n_d = len(cons) if kind.free_allocation else 0
    q = slice(0, E + P)
    h = slice(q.stop, q.stop + N)
    w = slice(h.stop, h.stop + P)
    eta = slice(w.stop, w.stop + P)
    s = slice(eta.stop, eta.stop + n_s)
    d = slice(s.stop, s.stop + n_d)
    return VariableLayout(
        kind=kind, q=q, h=h, w=w, eta=eta, s=s, d=d, n=d.stop,
        edge_ids=tuple(e.id for e in net.edges()), node_ids=tuple(n.id for n in net.nodes),
        pump_ids=tuple(p.id for p in net.pumps), producer_ids=prods, consumer_ids=cons,
        n_pipes=E,
    )


@dataclass
class KernelData:
    """Structure-of-arrays view of the nonlinear rows, consumed by the kernels."""

    n_pipes: int
    n_pumps: int
    pipe_row0: int
    head_row0: int
    eff_row0: int
    with_cost: bool
    arrays: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["arrays"][name]
        except KeyError:
            raise AttributeError(name) from None


def _ia(values) -> np.ndarray:
    return np.ascontiguousarray(values, dtype=np.int64)


def _fa(values) -> np.ndarray:
    return np.ascontiguousarray(values, dtype=float)


class PipelineNlp(NlpProblem):
    """NlpProblem built from a network; keeps the layout and row map for reporting."""

    network: Network
    layout: VariableLayout
    kind: FormulationKind


def build_nlp(net: Network, kind: FormulationKind, backend: str | None = None) -> PipelineNlp:
    lay = build_layout(net, kind)
    kern = kernels.get_backend(backend)
    E, P, N = len(net.pipes), len(net.pumps), len(net.nodes)
    idx_node = {n.id: k for k, n in enumerate(net.nodes)}
    H0 = lay.h.start

    def hv(nid):
        return H0 + idx_node[nid]

    alloc = kind.allocation_map()
    if not kind.free_allocation:
        if kind.fixed_allocation is None:
            raise FormulationError("f1 requires a fixed allocation")
        unknown = sorted(set(alloc) - set(idx_node))
        if unknown:
            raise FormulationError(f"allocation refers to unknown node(s) {', '.join(unknown)}")
        s_tot = sum(s for s, _ in alloc.values())
        d_tot = sum(d for _, d in alloc.values())
        if abs(s_tot - d_tot) > 1e-9 * max(1.0, s_tot, d_tot):
            raise FormulationError(f"fixed allocation does not balance: supply {s_tot} vs demand {d_tot} m3/s")

    pipe_row0, bal_row0 = 0, E
    head_row0 = bal_row0 + N
    eff_row0 = head_row0 + P
    dh_row0 = eff_row0 + P
    m = dh_row0 + P

    # ---- Jacobian structure
    jr: list[int] = []
    jc: list[int] = []
    jv: list[float] = []

    def add(r, c, v=0.0):
        jr.append(r)
        jc.append(c)
        jv.append(v)
        return len(jr) - 1

    pos_pipe_q = []
    for k, p in enumerate(net.pipes):
        pos_pipe_q.append(add(pipe_row0 + k, lay.q.start + k))
        add(pipe_row0 + k, hv(p.from_node), 1.0)
        add(pipe_row0 + k, hv(p.to_node), -1.0)
    edges = list(net.edges())
    s_index = {nid: lay.s.start + k for k, nid in enumerate(lay.producer_ids)} if kind.free_allocation else {}
    d_index = {nid: lay.d.start + k for k, nid in enumerate(lay.consumer_ids)} if kind.free_allocation else {}
    for j, node in enumerate(net.nodes):
        r = bal_row0 + j
        for k, e in enumerate(edges):
            if e.from_node == node.id:
                add(r, lay.q.start + k, 1.0)
            elif e.to_node == node.id:
                add(r, lay.q.start + k, -1.0)
        if node.id in s_index:
            add(r, s_index[node.id], -1.0)
        if node.id in d_index:
            add(r, d_index[node.id], 1.0)
    pos_head_q, pos_head_w, pos_eff_q, pos_eff_w = [], [], [], []
    for k, p in enumerate(net.pumps):
        qv = lay.q.start + E + k
        r = head_row0 + k
        pos_head_q.append(add(r, qv))
        add(r, hv(p.from_node), -1.0)
        add(r, hv(p.to_node), 1.0)
        pos_head_w.append(add(r, lay.w.start + k))
    for k, p in enumerate(net.pumps):
        r = eff_row0 + k
        pos_eff_q.append(add(r, lay.q.start + E + k))
        pos_eff_w.append(add(r, lay.w.start + k))
        add(r, lay.eta.start + k, 1.0)
    for k, p in enumerate(net.pumps):
        r = dh_row0 + k
        add(r, hv(p.from_node), -1.0)
        add(r, hv(p.to_node), 1.0)
    jac_rows, jac_cols, jac_const = _ia(jr), _ia(jc), _fa(jv)

    # ---- Hessian structure (lower triangle)
    hr: list[int] = []
    hc: list[int] = []

    def hadd(a, b):
        if a < b:
            a, b = b, a
        hr.append(a)
        hc.append(b)
        return len(hr) - 1

    with_cost = kind.objective is not Objective.MAX_TRANSPORT_VALUE and P > 0
    hpos = {k: [] for k in ("pipe_qq", "head_qq", "head_ww", "eff_qq", "eff_wq", "eff_ww",
                            "cost_hi_q", "cost_hj_q", "cost_eta_q", "cost_eta_hi", "cost_eta_hj",
                            "cost_eta_eta")}
    for k in range(E):
        qv = lay.q.start + k
        hpos["pipe_qq"].append(hadd(qv, qv))
    for k, p in enumerate(net.pumps):
        qv, wv, ev = lay.q.start + E + k, lay.w.start + k, lay.eta.start + k
        hpos["head_qq"].append(hadd(qv, qv))
        hpos["head_ww"].append(hadd(wv, wv))
        hpos["eff_qq"].append(hadd(qv, qv))
        hpos["eff_wq"].append(hadd(wv, qv))
        hpos["eff_ww"].append(hadd(wv, wv))
        if with_cost:
            hi, hj = hv(p.from_node), hv(p.to_node)
            hpos["cost_hi_q"].append(hadd(hi, qv))
            hpos["cost_hj_q"].append(hadd(hj, qv))
            hpos["cost_eta_q"].append(hadd(ev, qv))
            hpos["cost_eta_hi"].append(hadd(ev, hi))
            hpos["cost_eta_hj"].append(hadd(ev, hj))
            hpos["cost_eta_eta"].append(hadd(ev, ev))
    hess_rows, hess_cols = _ia(hr), _ia(hc)

    # ---- kernel data
    nu = net.fluid.kinematic_viscosity
    rho = net.fluid.density
    kd = KernelData(E, P, pipe_row0, head_row0, eff_row0, with_cost)
    A = kd.arrays
    A["pipe_q"] = _ia([lay.q.start + k for k in range(E)])
    A["pipe_hi"] = _ia([hv(p.from_node) for p in net.pipes])
    A["pipe_hj"] = _ia([hv(p.to_node) for p in net.pipes])
    A["pipe_k"] = _fa([leibenzon_coefficient(nu, p.diameter, p.flow_exponent, p.beta) * p.length
                       for p in net.pipes])
    A["pipe_dz"] = _fa([net.node(p.to_node).elevation - net.node(p.from_node).elevation for p in net.pipes])
    A["pipe_m"] = _fa([p.flow_exponent for p in net.pipes])
    A["pump_q"] = _ia([lay.q.start + E + k for k in range(P)])
    A["pump_hi"] = _ia([hv(p.from_node) for p in net.pumps])
    A["pump_hj"] = _ia([hv(p.to_node) for p in net.pumps])
    A["pump_w"] = _ia([lay.w.start + k for k in range(P)])
    A["pump_eta"] = _ia([lay.eta.start + k for k in range(P)])
    A["pump_a0"] = _fa([p.a0 for p in net.pumps])
    A["pump_a1"] = _fa([p.a1 for p in net.pumps])
    A["pump_wnom"] = _fa([p.speed_nom for p in net.pumps])
    A["pump_qnom"] = _fa([p.q_nom for p in net.pumps])
    A["pump_etanom"] = _fa([p.eff_nom for p in net.pumps])
    # $/h per (m^3/s * m): price[$/J] * 3600[s/h] * rho * g / (motor * transmission)
    A["pump_kcost"] = _fa([p.electricity_price * SECONDS_PER_HOUR * rho * GRAVITY
                           / (p.motor_eff * p.transmission_eff) for p in net.pumps])
    for key, pos in (("pos_pipe_q", pos_pipe_q), ("pos_head_q", pos_head_q), ("pos_head_w", pos_head_w),
                     ("pos_eff_q", pos_eff_q), ("pos_eff_w", pos_eff_w)):
        A[key] = _ia(pos)
    for key, pos in hpos.items():
        A["hpos_" + key] = _ia(pos)

    # ---- linear objective part: J_E = 3600 * (sum t d - sum r s)
    lin = np.zeros(lay.n)
    je_const = 0.0
    if kind.free_allocation:
        for nid, iv in s_index.items():
            lin[iv] = -SECONDS_PER_HOUR * net.node(nid).producer.price
        for nid, iv in d_index.items():
            lin[iv] = SECONDS_PER_HOUR * net.node(nid).consumer.price
    else:
        je_const = fixed_transport_value(net, alloc)

    objective = kind.objective
    cost_sign = {Objective.MIN_OPERATING_COST: 1.0, Objective.MAX_TOTAL_VALUE: -1.0,
                 Objective.MAX_TRANSPORT_VALUE: 0.0}[objective]
    lin_on = objective is not Objective.MIN_OPERATING_COST

    def f(x):
        x = np.ascontiguousarray(x, dtype=float)
        val = float(lin @ x) if lin_on else 0.0
        if cost_sign:
            val += cost_sign * kern.pump_cost(kd, x)
        return val

    def grad(x):
        x = np.ascontiguousarray(x, dtype=float)
        g = lin.copy() if lin_on else np.zeros(lay.n)
        if cost_sign:
            kern.pump_cost_gradient(kd, x, cost_sign, g)
        return g

    # linear rows (balance, head difference) as a sparse constant block
    lin_rows = np.flatnonzero((jac_rows >= bal_row0) & (jac_rows < head_row0) | (jac_rows >= dh_row0))
    lr, lc, lv = jac_rows[lin_rows], jac_cols[lin_rows], jac_const[lin_rows]

    def g(x):
        x = np.ascontiguousarray(x, dtype=float)
        out = np.zeros(m)
        np.add.at(out, lr, lv * x[lc])
        kern.constraints(kd, x, out)
        return out

    def jac(x):
        x = np.ascontiguousarray(x, dtype=float)
        vals = jac_const.copy()
        kern.jacobian(kd, x, vals)
        return vals

    def hess(x, lam, obj_factor):
        x = np.ascontiguousarray(x, dtype=float)
        lam = np.ascontiguousarray(lam, dtype=float)
        vals = np.zeros(len(hess_rows))
        kern.hessian(kd, x, lam, float(obj_factor) * cost_sign, vals)
        return vals

    # ---- bounds
    xl = np.empty(lay.n)
    xu = np.empty(lay.n)
    bad: list[str] = []
    for k, p in enumerate(net.pipes):
        xl[k], xu[k] = p.flow_min, p.flow_max
    for k, p in enumerate(net.pumps):
        xl[E + k], xu[E + k] = p.flow_bounds
        xl[lay.w.start + k], xu[lay.w.start + k] = p.speed_bounds
        xl[lay.eta.start + k], xu[lay.eta.start + k] = p.eff_bounds
    for j, node in enumerate(net.nodes):
        xl[H0 + j], xu[H0 + j] = node.head_min, node.head_max
    for nid, iv in s_index.items():
        b = net.node(nid).producer
        xl[iv], xu[iv] = b.q_min, b.q_max
    for nid, iv in d_index.items():
        b = net.node(nid).consumer
        xl[iv], xu[iv] = b.q_min, b.q_max
    names = lay.names()
    for k in np.flatnonzero(xl > xu):
        bad.append(f"{names[k]}: lower {xl[k]:g} > upper {xu[k]:g}")

    gl = np.zeros(m)
    gu = np.zeros(m)
    if not kind.free_allocation:
        for nid, (s, d) in alloc.items():
            gl[bal_row0 + idx_node[nid]] = gu[bal_row0 + idx_node[nid]] = s - d
    for k, p in enumerate(net.pumps):
        gl[dh_row0 + k], gu[dh_row0 + k] = p.head_gain_min, p.head_gain_max
        if p.head_gain_min > p.head_gain_max:
            bad.append(f"pump_dH[{p.id}]: lower > upper")
    if bad:
        raise FormulationError("infeasible bounds: " + "; ".join(bad))

    # ---- initial point: box midpoints, nominal efficiency, pump flow on the affinity line
    x0 = 0.5 * (xl + xu)
    for k, p in enumerate(net.pumps):
        x0[lay.eta.start + k] = p.eff_nom
        w0 = x0[lay.w.start + k]
        x0[E + k] = min(max(p.q_nom * w0 / p.speed_nom, xl[E + k]), xu[E + k])

    con_names = ([f"pipe[{p.id}]" for p in net.pipes] + [f"balance[{n.id}]" for n in net.nodes]
                 + [f"pump_head[{p.id}]" for p in net.pumps] + [f"pump_eff[{p.id}]" for p in net.pumps]
                 + [f"pump_dH[{p.id}]" for p in net.pumps])
    groups = {"pipe": slice(pipe_row0, bal_row0), "balance": slice(bal_row0, head_row0),
              "pump_head": slice(head_row0, eff_row0), "pump_eff": slice(eff_row0, dh_row0),
              "pump_dh": slice(dh_row0, m)}

    prob = PipelineNlp(
        n=lay.n, m=m, x_lower=xl, x_upper=xu, g_lower=gl, g_upper=gu,
        objective=f, gradient=grad, constraints=g, jacobian=jac,
        jac_structure=(jac_rows, jac_cols), hessian=hess, hess_structure=(hess_rows, hess_cols),
        x0=x0, sense="minimize" if objective is Objective.MIN_OPERATING_COST else "maximize",
        var_names=names, con_names=con_names, row_groups=groups,
    )
    prob.network = net
    prob.layout = lay
    prob.kind = kind
    prob.kernel_data = kd
    prob.transport_value_const = je_const
    return prob


def fixed_transport_value(net: Network, alloc: Mapping[str, tuple[float, float]]) -> float:
    """``J_E`` in $/h of a fixed allocation, priced at the participants' bids."""
    total = 0.0
    for nid, (s, d) in alloc.items():
        node = net.node(nid)
        if s and node.producer is not None:
            total -= node.producer.price * s
        if d and node.consumer is not None:
            total += node.consumer.price * d
    return SECONDS_PER_HOUR * total


@dataclass(frozen=True)
class ObjectiveTerms:
    J_E: float
    J_O: float
    J_P: float


def allocation_at(net: Network, layout: VariableLayout, x: np.ndarray) -> dict[str, tuple[float, float]]:
    """Injection and withdrawal (m^3/s) per participant node at point ``x``."""
    if not layout.kind.free_allocation:
        alloc = layout.kind.allocation_map()
        ids = dict.fromkeys(list(layout.producer_ids) + list(layout.consumer_ids) + list(alloc))
        return {nid: alloc.get(nid, (0.0, 0.0)) for nid in ids}
    out: dict[str, list[float]] = {}
    for k, nid in enumerate(layout.producer_ids):
        out.setdefault(nid, [0.0, 0.0])[0] = float(x[layout.s.start + k])
    for k, nid in enumerate(layout.consumer_ids):
        out.setdefault(nid, [0.0, 0.0])[1] = float(x[layout.d.start + k])
    return {k: (v[0], v[1]) for k, v in out.items()}


def objective_terms(net: Network, layout: VariableLayout, x: np.ndarray) -> ObjectiveTerms:
    x = np.asarray(x, dtype=float)
    alloc = allocation_at(net, layout, x)
    J_E = 0.0
    for nid, (s, d) in alloc.items():
        node = net.node(nid)
        if node.producer is not None:
            J_E -= node.producer.price * s
        if node.consumer is not None:
            J_E += node.consumer.price * d
    J_E *= SECONDS_PER_HOUR
    J_O = 0.0
    E = layout.n_pipes
    for k, p in enumerate(net.pumps):
        Q = x[layout.q.start + E + k]
        dh = x[layout.h_index(p.to_node)] - x[layout.h_index(p.from_node)]
        eta = x[layout.eta.start + k]
        J_O += (p.electricity_price * SECONDS_PER_HOUR * net.fluid.density * GRAVITY * Q * dh
                / (eta * p.motor_eff * p.transmission_eff))
    return ObjectiveTerms(J_E=J_E, J_O=J_O, J_P=J_E - J_O)


# ---------------------------------------------------------------------------
# derivative audit
# ---------------------------------------------------------------------------

@dataclass
class DerivativeReport:
    gradient: float
    jacobian: float
    hessian: float
    jacobian_by_group: dict[str, float] = field(default_factory=dict)
    worst_gradient: str | None = None
    worst_jacobian: str | None = None

    def ok(self, grad_tol=1e-6, jac_tol=1e-6, hess_tol=1e-5) -> bool:
        return self.gradient <= grad_tol and self.jacobian <= jac_tol and self.hessian <= hess_tol


def _rel(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


def check_derivatives(problem: NlpProblem, x: np.ndarray | None = None, h: float | None = None,
                      seed: int = 0, n_directions: int = 3) -> DerivativeReport:
    """Compare analytic derivatives with central finite differences.

    Errors are ``|a - fd| / max(1, |a|, |fd|)``.  Steps are
    ``h * max(1, |x_i|)`` with ``h`` defaulting to ``eps**(1/3)``.  The
    Hessian is checked through products with random directions scaled like
    ``x``, against differences of the Lagrangian gradient.
    """
    x = np.array(problem.x0 if x is None else x, dtype=float)
    n = problem.n
    if h is None:
        h = np.finfo(float).eps ** (1.0 / 3.0)
    steps = h * np.maximum(1.0, np.abs(x))

    g_an = problem.gradient(x)
    J_an = problem.dense_jacobian(x)
    g_fd = np.empty(n)
    J_fd = np.empty((problem.m, n))
    for i in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[i] += steps[i]
        xm[i] -= steps[i]
        dx = xp[i] - xm[i]
        g_fd[i] = (problem.objective(xp) - problem.objective(xm)) / dx
        J_fd[:, i] = (problem.constraints(xp) - problem.constraints(xm)) / dx
    ge = _rel(g_an, g_fd)
    Je = _rel(J_an, J_fd)

    rng = np.random.default_rng(seed)
    scale = np.maximum(1.0, np.abs(x))
    herr = 0.0
    for _ in range(n_directions):
        lam = rng.standard_normal(problem.m)
        of = float(rng.standard_normal())
        v = rng.standard_normal(n) * scale

        def lag_grad(z):
            return of * problem.gradient(z) + problem.dense_jacobian(z).T @ lam

        Hv = problem.dense_hessian(x, lam, of) @ v
        fd = (lag_grad(x + h * v) - lag_grad(x - h * v)) / (2.0 * h)
        herr = max(herr, float(np.max(_rel(Hv, fd)) if n else 0.0))

    by_group = {}
    for name, sl in problem.row_groups.items():
        block = Je[sl]
        by_group[name] = float(block.max()) if block.size else 0.0
    names = problem.var_names or [str(i) for i in range(n)]
    worst_g = names[int(np.argmax(ge))] if n else None
    worst_j = None
    if Je.size:
        r, c = np.unravel_index(int(np.argmax(Je)), Je.shape)
        rname = problem.con_names[r] if problem.con_names else str(r)
        worst_j = f"{rname} / {names[c]}"
    return DerivativeReport(
        gradient=float(ge.max()) if n else 0.0,
        jacobian=float(Je.max()) if Je.size else 0.0,
        hessian=herr,
        jacobian_by_group=by_group,
        worst_gradient=worst_g,
        worst_jacobian=worst_j,
    )
