"""Problem-instance data model for steady liquid pipeline networks.

All quantities held by these classes are SI: metres, seconds, kilograms,
watts, commodity prices in $/m^3 and electricity prices in $/J.  Pump shaft
speeds stay in rpm because only the ratio to the nominal speed enters the
model.  The JSON file format uses the conventional units of pipeline tables
(m^3/h, km, $/kWh); conversion happens exactly once, in :func:`parse_network`
and :func:`serialize_network`.
"""

from __future__ import annotations

import json
import math
import warnings
from collections import deque
from dataclasses import dataclass, field, fields
from typing import Any, Iterable

SECONDS_PER_HOUR = 3600.0
JOULES_PER_KWH = 3.6e6

DEFAULT_MOTOR_EFF = 0.95
DEFAULT_TRANSMISSION_EFF = 0.95


class NetworkError(ValueError):
    """Base class for problems with a network document or instance."""


class NetworkFormatError(NetworkError):
    """Raised when a network document cannot be parsed.

    ``line`` and ``column`` are set for JSON syntax errors.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class NetworkValidationError(NetworkError):
    """Raised by ``parse_network(check=True)`` when validation finds errors."""

    def __init__(self, diagnostics: list["Diagnostic"]):
        self.diagnostics = diagnostics
        lines = [str(d) for d in diagnostics if d.severity == "error"]
        super().__init__("invalid network:\n  " + "\n  ".join(lines))


class NetworkFormatWarning(UserWarning):
    """Emitted for unknown keys when parsing in lenient mode."""


@dataclass(frozen=True)
class Fluid:
    density: float  # kg/m^3
    kinematic_viscosity: float  # m^2/s


@dataclass(frozen=True)
class Bid:
    """A participant's offer to sell or bid to buy: price and quantity window."""

    price: float  # $/m^3
    q_min: float  # m^3/s
    q_max: float  # m^3/s


@dataclass(frozen=True)
class Node:
    id: str
    elevation: float
    head_min: float
    head_max: float
    producer: Bid | None = None
    consumer: Bid | None = None


@dataclass(frozen=True)
class Pipe:
    id: str
    from_node: str
    to_node: str
    length: float
    diameter: float
    flow_min: float
    flow_max: float
    beta: float = 0.0246
    flow_exponent: float = 0.25
    roughness: float = 4.5e-5


@dataclass(frozen=True)
class Pump:
    id: str
    from_node: str
    to_node: str
    a0: float  # m
    a1: float  # s^2/m^5
    q_nom: float  # m^3/s
    speed_nom: float  # rpm
    eff_nom: float
    electricity_price: float  # $/J
    head_gain_min: float
    head_gain_max: float
    motor_eff: float = DEFAULT_MOTOR_EFF
    transmission_eff: float = DEFAULT_TRANSMISSION_EFF
    flow_factor_lo: float = 0.8
    flow_factor_hi: float = 1.2
    speed_factor_lo: float = 0.8
    speed_factor_hi: float = 1.2
    eff_factor_lo: float = 0.7

    @property
    def flow_bounds(self) -> tuple[float, float]:
        return self.flow_factor_lo * self.q_nom, self.flow_factor_hi * self.q_nom

    @property
    def speed_bounds(self) -> tuple[float, float]:
        return self.speed_factor_lo * self.speed_nom, self.speed_factor_hi * self.speed_nom

    @property
    def eff_bounds(self) -> tuple[float, float]:
        return self.eff_factor_lo * self.eff_nom, self.eff_nom


@dataclass(frozen=True)
class Network:
    fluid: Fluid
    nodes: tuple[Node, ...]
    pipes: tuple[Pipe, ...] = ()
    pumps: tuple[Pump, ...] = ()
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "pipes", tuple(self.pipes))
        object.__setattr__(self, "pumps", tuple(self.pumps))
        object.__setattr__(self, "_index", {n.id: k for k, n in enumerate(self.nodes)})

    def node_index(self, node_id: str) -> int:
        return self._index[node_id]

    def node(self, node_id: str) -> Node:
        return self.nodes[self._index[node_id]]

    @property
    def producers(self) -> list[Node]:
        return [n for n in self.nodes if n.producer is not None]

    @property
    def consumers(self) -> list[Node]:
        return [n for n in self.nodes if n.consumer is not None]

    def edges(self) -> Iterable[Pipe | Pump]:
        yield from self.pipes
        yield from self.pumps

    def replace_node(self, node: Node) -> "Network":
        nodes = tuple(node if n.id == node.id else n for n in self.nodes)
        return Network(self.fluid, nodes, self.pipes, self.pumps)

    def replace_pump(self, pump: Pump) -> "Network":
        pumps = tuple(pump if p.id == pump.id else p for p in self.pumps)
        return Network(self.fluid, self.nodes, self.pipes, pumps)


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

# (file key, attribute, factor from file units to SI, required)
_FLUID_KEYS = [
    ("density", "density", 1.0, True),
    ("kinematic_viscosity", "kinematic_viscosity", 1.0, True),
]
_BID_KEYS = [
    ("price", "price", 1.0, True),
    ("q_min", "q_min", 1.0 / SECONDS_PER_HOUR, True),
    ("q_max", "q_max", 1.0 / SECONDS_PER_HOUR, True),
]
_NODE_KEYS = [
    ("elevation", "elevation", 1.0, True),
    ("head_min", "head_min", 1.0, True),
    ("head_max", "head_max", 1.0, True),
]
_PIPE_KEYS = [
    ("diameter", "diameter", 1.0, True),
    ("flow_min", "flow_min", 1.0 / SECONDS_PER_HOUR, True),
    ("flow_max", "flow_max", 1.0 / SECONDS_PER_HOUR, True),
    ("beta", "beta", 1.0, False),
    ("flow_exponent", "flow_exponent", 1.0, False),
    ("roughness", "roughness", 1.0, False),
]
_PUMP_KEYS = [
    ("a0", "a0", 1.0, True),
    ("a1", "a1", 1.0, True),
    ("q_nom", "q_nom", 1.0 / SECONDS_PER_HOUR, True),
    ("speed_nom", "speed_nom", 1.0, True),
    ("eff_nom", "eff_nom", 1.0, True),
    ("electricity_price", "electricity_price", 1.0 / JOULES_PER_KWH, True),
    ("head_gain_min", "head_gain_min", 1.0, True),
    ("head_gain_max", "head_gain_max", 1.0, True),
    ("motor_eff", "motor_eff", 1.0, False),
    ("transmission_eff", "transmission_eff", 1.0, False),
    ("flow_factor_lo", "flow_factor_lo", 1.0, False),
    ("flow_factor_hi", "flow_factor_hi", 1.0, False),
    ("speed_factor_lo", "speed_factor_lo", 1.0, False),
    ("speed_factor_hi", "speed_factor_hi", 1.0, False),
    ("eff_factor_lo", "eff_factor_lo", 1.0, False),
]
_TOP_KEYS = {"fluid", "nodes", "pipes", "pumps", "name", "notes"}


class _Reader:
    def __init__(self, strict: bool):
        self.strict = strict

    def check_keys(self, obj: Any, allowed: set[str], where: str) -> None:
        if not isinstance(obj, dict):
            raise NetworkFormatError(f"{where}: expected an object, got {type(obj).__name__}")
        extra = sorted(set(obj) - allowed)
        if extra:
            msg = f"{where}: unknown key(s) {', '.join(extra)}"
            if self.strict:
                raise NetworkFormatError(msg)
            warnings.warn(msg, NetworkFormatWarning, stacklevel=4)

    @staticmethod
    def number(obj: dict, key: str, where: str) -> float:
        value = obj[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise NetworkFormatError(f"{where}: '{key}' must be a number")
        value = float(value)
        if not math.isfinite(value):
            raise NetworkFormatError(f"{where}: '{key}' is not finite")
        return value

    @staticmethod
    def string(obj: dict, key: str, where: str) -> str:
        if key not in obj:
            raise NetworkFormatError(f"{where}: missing '{key}'")
        value = obj[key]
        if not isinstance(value, str) or not value:
            raise NetworkFormatError(f"{where}: '{key}' must be a non-empty string")
        return value

    def block(self, obj: dict, spec, where: str) -> dict[str, float]:
        out = {}
        for key, attr, factor, required in spec:
            if key not in obj:
                if required:
                    raise NetworkFormatError(f"{where}: missing '{key}'")
                continue
            out[attr] = self.number(obj, key, where) * factor
        return out


def parse_network(document: str, *, strict: bool = True, check: bool = True) -> Network:
    """Parse a network document (JSON text in file units) into an SI :class:`Network`.

    ``strict=False`` downgrades unknown keys to :class:`NetworkFormatWarning`.
    With ``check=True`` the result is passed through :func:`validate_network`
    and a :class:`NetworkValidationError` is raised if any error is found.
    """
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"syntax error: {exc.msg}", exc.lineno, exc.colno) from None
    net = network_from_dict(raw, strict=strict)
    if check:
        diags = validate_network(net)
        if any(d.severity == "error" for d in diags):
            raise NetworkValidationError(diags)
    return net


def network_from_dict(raw: Any, *, strict: bool = True) -> Network:
    rd = _Reader(strict)
    rd.check_keys(raw, _TOP_KEYS, "document")
    for key in ("fluid", "nodes"):
        if key not in raw:
            raise NetworkFormatError(f"document: missing '{key}'")

    rd.check_keys(raw["fluid"], {k for k, *_ in _FLUID_KEYS}, "fluid")
    fluid = Fluid(**rd.block(raw["fluid"], _FLUID_KEYS, "fluid"))

    nodes: list[Node] = []
    seen: set[str] = set()
    for k, item in enumerate(_as_list(raw["nodes"], "nodes")):
        where = f"nodes[{k}]"
        rd.check_keys(item, {"id", "producer", "consumer"} | {key for key, *_ in _NODE_KEYS}, where)
        nid = rd.string(item, "id", where)
        if nid in seen:
            raise NetworkFormatError(f"duplicate node id '{nid}'")
        seen.add(nid)
        bids = {}
        for role in ("producer", "consumer"):
            b = item.get(role)
            if b is None:
                continue
            bw = f"node {nid} {role}"
            rd.check_keys(b, {key for key, *_ in _BID_KEYS}, bw)
            bids[role] = Bid(**rd.block(b, _BID_KEYS, bw))
        nodes.append(Node(id=nid, **rd.block(item, _NODE_KEYS, f"node {nid}"), **bids))

    edge_ids: set[str] = set()

    def edge_common(item: dict, where: str) -> tuple[str, str, str]:
        eid = rd.string(item, "id", where)
        if eid in edge_ids:
            raise NetworkFormatError(f"duplicate edge id '{eid}'")
        edge_ids.add(eid)
        ends = []
        for key in ("from", "to"):
            ref = rd.string(item, key, f"edge {eid}")
            if ref not in seen:
                raise NetworkFormatError(f"edge {eid}: unknown node '{ref}'")
            ends.append(ref)
        return eid, ends[0], ends[1]

    pipes: list[Pipe] = []
    for k, item in enumerate(_as_list(raw.get("pipes", []), "pipes")):
        where = f"pipes[{k}]"
        allowed = {"id", "from", "to", "length_km", "length_m"} | {key for key, *_ in _PIPE_KEYS}
        rd.check_keys(item, allowed, where)
        eid, a, b = edge_common(item, where)
        if ("length_km" in item) == ("length_m" in item):
            raise NetworkFormatError(f"pipe {eid}: give exactly one of 'length_km' or 'length_m'")
        if "length_km" in item:
            length = rd.number(item, "length_km", f"pipe {eid}") * 1000.0
        else:
            length = rd.number(item, "length_m", f"pipe {eid}")
        pipes.append(Pipe(id=eid, from_node=a, to_node=b, length=length,
                          **rd.block(item, _PIPE_KEYS, f"pipe {eid}")))

    pumps: list[Pump] = []
    for k, item in enumerate(_as_list(raw.get("pumps", []), "pumps")):
        where = f"pumps[{k}]"
        rd.check_keys(item, {"id", "from", "to"} | {key for key, *_ in _PUMP_KEYS}, where)
        eid, a, b = edge_common(item, where)
        pumps.append(Pump(id=eid, from_node=a, to_node=b, **rd.block(item, _PUMP_KEYS, f"pump {eid}")))

    return Network(fluid=fluid, nodes=tuple(nodes), pipes=tuple(pipes), pumps=tuple(pumps))


def _as_list(value: Any, where: str) -> list:
    if not isinstance(value, list):
        raise NetworkFormatError(f"'{where}' must be a list")
    return value


def _to_file(value: float, factor: float) -> float:
    """File-unit number that converts back to exactly ``value``."""
    if factor == 1.0:
        return value
    u = value / factor
    lo = hi = u
    for _ in range(8):
        if lo * factor == value:
            return lo
        if hi * factor == value:
            return hi
        lo = math.nextafter(lo, -math.inf)
        hi = math.nextafter(hi, math.inf)
    return u


def _write_block(obj, spec) -> dict[str, float]:
    return {key: _to_file(getattr(obj, attr), factor) for key, attr, factor, _ in spec}


def network_to_dict(net: Network) -> dict:
    nodes = []
    for n in net.nodes:
        item = {"id": n.id, **_write_block(n, _NODE_KEYS)}
        if n.producer is not None:
            item["producer"] = _write_block(n.producer, _BID_KEYS)
        if n.consumer is not None:
            item["consumer"] = _write_block(n.consumer, _BID_KEYS)
        nodes.append(item)
    pipes = [
        {"id": p.id, "from": p.from_node, "to": p.to_node, "length_m": p.length,
         **_write_block(p, _PIPE_KEYS)}
        for p in net.pipes
    ]
    pumps = [
        {"id": p.id, "from": p.from_node, "to": p.to_node, **_write_block(p, _PUMP_KEYS)}
        for p in net.pumps
    ]
    return {"fluid": _write_block(net.fluid, _FLUID_KEYS), "nodes": nodes, "pipes": pipes, "pumps": pumps}


def serialize_network(net: Network, indent: int | None = 2) -> str:
    return json.dumps(network_to_dict(net), indent=indent)


def load_network(path, **kwargs) -> Network:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read(), **kwargs)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    element: str | None = None

    def __str__(self) -> str:
        where = f"[{self.element}] " if self.element else ""
        return f"{self.severity}: {where}{self.message}"


def _finite(obj) -> list[str]:
    bad = []
    for f in fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, float) and not math.isfinite(v):
            bad.append(f.name)
    return bad


def validate_network(net: Network) -> list[Diagnostic]:
    """Check type invariants, connectivity and aggregate bid feasibility.

    Returns an empty list for a valid network.  Never raises.
    """
    out: list[Diagnostic] = []

    def err(msg, el=None):
        out.append(Diagnostic("error", msg, el))

    def warn(msg, el=None):
        out.append(Diagnostic("warning", msg, el))

    fl = net.fluid
    if not (fl.density > 0):
        err("density must be positive", "fluid")
    if not (fl.kinematic_viscosity > 0):
        err("kinematic viscosity must be positive", "fluid")

    ids: set[str] = set()
    for n in net.nodes:
        if n.id in ids:
            err("duplicate node id", n.id)
        ids.add(n.id)
        for name in _finite(n):
            err(f"{name} is not finite", n.id)
        if not n.head_min < n.head_max:
            err("head_min must be below head_max", n.id)
        if n.head_min < 0:
            err("head_min must be nonnegative", n.id)
        for role, bid in (("producer", n.producer), ("consumer", n.consumer)):
            if bid is None:
                continue
            el = f"{n.id}:{role}"
            for name in _finite(bid):
                err(f"{name} is not finite", el)
            if bid.q_min < 0:
                err("q_min must be nonnegative", el)
            if bid.q_min > bid.q_max:
                err("q_min exceeds q_max", el)

    edge_ids: set[str] = set()
    for e in net.edges():
        if e.id in edge_ids:
            err("duplicate edge id", e.id)
        edge_ids.add(e.id)
        for end in (e.from_node, e.to_node):
            if end not in net._index:
                err(f"unknown node '{end}'", e.id)
        if e.from_node == e.to_node:
            err("edge endpoints coincide", e.id)
        for name in _finite(e):
            err(f"{name} is not finite", e.id)

    for p in net.pipes:
        if not p.length > 0:
            err("length must be positive", p.id)
        if not p.diameter > 0:
            err("diameter must be positive", p.id)
        if not p.beta > 0:
            err("beta must be positive", p.id)
        if not 0 <= p.flow_exponent < 1:
            err("flow exponent must lie in [0, 1)", p.id)
        if not 0 < p.flow_min <= p.flow_max:
            err("flow bounds must satisfy 0 < flow_min <= flow_max", p.id)
        if p.roughness < 0:
            err("roughness must be nonnegative", p.id)

    for p in net.pumps:
        if not p.a0 > 0:
            err("a0 must be positive", p.id)
        if p.a1 < 0:
            err("a1 must be nonnegative", p.id)
        if not p.q_nom > 0:
            err("q_nom must be positive", p.id)
        if not p.speed_nom > 0:
            err("speed_nom must be positive", p.id)
        for name in ("eff_nom", "motor_eff", "transmission_eff"):
            if not 0 < getattr(p, name) <= 1:
                err(f"{name} must lie in (0, 1]", p.id)
        if p.electricity_price < 0:
            err("electricity price must be nonnegative", p.id)
        if not 0 < p.flow_factor_lo < p.flow_factor_hi:
            err("flow factors must satisfy 0 < lo < hi", p.id)
        if not 0 < p.speed_factor_lo < p.speed_factor_hi:
            err("speed factors must satisfy 0 < lo < hi", p.id)
        if not 0 < p.eff_factor_lo <= 1:
            err("eff_factor_lo must lie in (0, 1]", p.id)
        if not p.head_gain_min < p.head_gain_max:
            err("head_gain_min must be below head_gain_max", p.id)

    if net.nodes and not _connected(net):
        err("graph not connected")

    prods = [n.producer for n in net.nodes if n.producer is not None]
    cons = [n.consumer for n in net.nodes if n.consumer is not None]
    s_min = sum(b.q_min for b in prods)
    s_max = sum(b.q_max for b in prods)
    d_min = sum(b.q_min for b in cons)
    d_max = sum(b.q_max for b in cons)
    if s_min > d_max:
        err(f"total minimum supply {s_min:g} m3/s exceeds total maximum demand {d_max:g} m3/s")
    if d_min > s_max:
        err(f"total minimum demand {d_min:g} m3/s exceeds total maximum supply {s_max:g} m3/s")

    # pump flow window against adjacent pipe bounds
    for p in net.pumps:
        lo, hi = p.flow_bounds
        for q in net.pipes:
            if {q.from_node, q.to_node} & {p.from_node, p.to_node}:
                if hi < q.flow_min or lo > q.flow_max:
                    warn(f"flow window [{lo:g}, {hi:g}] m3/s disjoint from pipe {q.id} bounds", p.id)
    return out


def _connected(net: Network) -> bool:
    adj: dict[str, list[str]] = {n.id: [] for n in net.nodes}
    for e in net.edges():
        if e.from_node in adj and e.to_node in adj:
            adj[e.from_node].append(e.to_node)
            adj[e.to_node].append(e.from_node)
    start = net.nodes[0].id
    seen = {start}
    queue = deque([start])
    while queue:
        for nb in adj[queue.popleft()]:
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return len(seen) == len(adj)
