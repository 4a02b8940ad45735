"""Generator for the bundled Seaway-like crude oil test case.

The route runs 968 km from an inland hub (N1) to a coastal terminal (N23)
with producers at N1, N9 and N18 and consumers at N15 and N23.  Pump and
bound data follow the published tables; chainages and elevations are read
approximately off the published route profile; a few engineering values
that are not published at all are filled with documented defaults.  Every
numeric field of the emitted document carries one of the provenance tags
``paper-table``, ``figure-digitized`` or ``assumed-default``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .network import Network, network_from_dict, validate_network

CASE_ID = "seaway-synth-v1"

PAPER_TABLE = "paper-table"
FIGURE = "figure-digitized"
ASSUMED = "assumed-default"
PROVENANCE_TAGS = (PAPER_TABLE, FIGURE, ASSUMED)

# Fluid and pipe data
DENSITY = 827.0
VISCOSITY = 4.9e-6
DIAMETER = 0.76
BETA = 0.0246
FLOW_EXPONENT = 0.25
ROUGHNESS = 4.5e-5
PIPE_FLOW = (500.0, 5000.0)  # m3/h
NODE_HEAD = (30.0, 740.0)  # m

# Pump data
PUMP_Q_NOM = 3600.0  # m3/h
PUMP_SPEED_NOM = 3000.0  # rpm
PUMP_EFF_NOM = 0.87
PUMP_A0 = 276.8
PUMP_A1 = 7.1e-6
PUMP_SPEED = (2400.0, 3600.0)
PUMP_EFF_MIN = 0.60
PUMP_HEAD_GAIN = (50.0, 450.0)  # m, not published
PUMP_FLOW_FACTOR = (0.1, 1.2)
ELECTRICITY = (0.12, 0.12, 0.13, 0.11, 0.12, 0.15, 0.15, 0.08, 0.14)  # $/kWh

PRODUCER_BID = (300.0, 360.0, 2950.0)  # $/m3, m3/h, m3/h
CONSUMER_BID = (310.0, 720.0, 3600.0)
F1_VOLUME = 2521.0  # m3/h

# Route elevation profile (chainage km, elevation m), read off the
# published elevation plot; node elevations are interpolated from it.
ELEVATION_PROFILE = (
    (0.0, 290.0), (72.0, 279.0), (144.0, 262.0), (216.0, 248.0), (288.0, 232.0),
    (360.0, 214.0), (432.0, 200.0), (504.0, 187.0), (576.0, 172.0), (660.0, 150.0),
    (760.0, 130.0), (800.0, 112.0), (840.0, 84.0), (870.0, 60.0), (920.0, 25.0), (968.0, 5.0),
)

# Node chainages (km).  Suction and discharge nodes of a pump station share
# a chainage.
CHAINAGE = (
    ("N1", 0.0), ("N2", 0.0), ("N3", 144.0), ("N4", 144.0), ("N5", 288.0), ("N6", 288.0),
    ("N7", 432.0), ("N8", 432.0), ("N9", 576.0), ("N10", 576.0), ("N11", 576.0), ("N12", 576.0),
    ("N13", 760.0), ("N14", 760.0), ("N15", 760.0), ("N16", 797.0), ("N17", 834.0), ("N18", 870.0),
    ("N19", 890.0), ("N20", 910.0), ("N21", 930.0), ("N22", 950.0), ("N23", 968.0),
)


def _elevation(km: float) -> float:
    pts = ELEVATION_PROFILE
    for (k0, z0), (k1, z1) in zip(pts, pts[1:]):
        if k0 <= km <= k1:
            return round(z0 + (z1 - z0) * (km - k0) / (k1 - k0), 1)
    raise ValueError(f"chainage {km} km outside the profile")


ROUTE = tuple((nid, km, _elevation(km)) for nid, km in CHAINAGE)

# Edges in route order: ("pipe"|"pump", id, from, to)
EDGES = (
    ("pump", "P1", "N1", "N2"), ("pipe", "L1", "N2", "N3"),
    ("pump", "P2", "N3", "N4"), ("pipe", "L2", "N4", "N5"),
    ("pump", "P3", "N5", "N6"), ("pipe", "L3", "N6", "N7"),
    ("pump", "P4", "N7", "N8"), ("pipe", "L4", "N8", "N9"),
    ("pump", "P5", "N9", "N10"), ("pump", "P6", "N10", "N11"), ("pump", "P7", "N11", "N12"),
    ("pipe", "L5", "N12", "N13"),
    ("pump", "P8", "N13", "N14"), ("pump", "P9", "N14", "N15"),
    ("pipe", "L6", "N15", "N16"), ("pipe", "L7", "N16", "N17"), ("pipe", "L8", "N17", "N18"),
    ("pipe", "L9", "N18", "N19"), ("pipe", "L10", "N19", "N20"), ("pipe", "L11", "N20", "N21"),
    ("pipe", "L12", "N21", "N22"), ("pipe", "L13", "N22", "N23"),
)

PRODUCERS = ("N1", "N9", "N18")
CONSUMERS = ("N15", "N23")


@dataclass(frozen=True)
class CaseManifest:
    """Generated case: network document, provenance and F1 allocation.

    ``provenance`` maps a JSON-pointer-like path of every numeric field in
    ``document`` (e.g. ``/pipes/L1/length_km``) to its tag;
    ``f1_allocation`` maps node id to ``(s, d)`` in m3/h.
    """

    case_id: str
    document: dict
    provenance: dict[str, str]
    f1_allocation: dict[str, tuple[float, float]]
    notes: tuple[str, ...] = field(default=())

    def network(self) -> Network:
        return network_from_dict(self.document)

    def document_text(self) -> str:
        return json.dumps(self.document, indent=2) + "\n"

    def provenance_text(self) -> str:
        body = {"case_id": self.case_id, "tags": list(PROVENANCE_TAGS),
                "fields": self.provenance, "notes": list(self.notes)}
        return json.dumps(body, indent=2, sort_keys=True) + "\n"

    def allocation_text(self) -> str:
        body = {nid: {"s": s, "d": d} for nid, (s, d) in self.f1_allocation.items()}
        return json.dumps({"units": "m3/h", "allocation": body}, indent=2) + "\n"

    def write(self, directory) -> dict[str, Path]:
        """Write the three case files into ``directory``; returns their paths."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "network": out / "seaway.json",
            "provenance": out / "seaway.provenance.json",
            "f1_allocation": out / "seaway.f1_allocation.json",
        }
        paths["network"].write_text(self.document_text())
        paths["provenance"].write_text(self.provenance_text())
        paths["f1_allocation"].write_text(self.allocation_text())
        return paths


def _f1_allocation() -> dict[str, tuple[float, float]]:
    # consumers split the volume in proportion to their (identical) boxes
    width = CONSUMER_BID[2] - CONSUMER_BID[1]
    share = F1_VOLUME * width / (2 * width)
    # producers: N18 at its minimum, N9 at its minimum and N1 carrying the
    # rest, which keeps every pump above its efficiency-limited minimum flow
    s18 = PRODUCER_BID[1]
    s9 = PRODUCER_BID[1]
    s1 = F1_VOLUME - s9 - s18
    return {"N1": (s1, 0.0), "N9": (s9, 0.0), "N18": (s18, 0.0),
            "N15": (0.0, share), "N23": (0.0, share)}


def generate_seaway() -> CaseManifest:
    prov: dict[str, str] = {}
    chain = {nid: (km, z) for nid, km, z in ROUTE}

    prov["/fluid/density"] = PAPER_TABLE
    prov["/fluid/kinematic_viscosity"] = PAPER_TABLE
    doc: dict = {
        "name": "Seaway crude oil pipeline (synthesized)",
        "notes": "Route geometry approximated from a published profile; see the provenance sidecar.",
        "fluid": {"density": DENSITY, "kinematic_viscosity": VISCOSITY},
        "nodes": [], "pipes": [], "pumps": [],
    }

    for nid, _km, z in ROUTE:
        node = {"id": nid, "elevation": z, "head_min": NODE_HEAD[0], "head_max": NODE_HEAD[1]}
        prov[f"/nodes/{nid}/elevation"] = FIGURE
        prov[f"/nodes/{nid}/head_min"] = PAPER_TABLE
        prov[f"/nodes/{nid}/head_max"] = PAPER_TABLE
        for role, ids, bid in (("producer", PRODUCERS, PRODUCER_BID), ("consumer", CONSUMERS, CONSUMER_BID)):
            if nid in ids:
                node[role] = {"price": bid[0], "q_min": bid[1], "q_max": bid[2]}
                for key in ("price", "q_min", "q_max"):
                    prov[f"/nodes/{nid}/{role}/{key}"] = PAPER_TABLE
        doc["nodes"].append(node)

    k_pump = 0
    for kind, eid, a, b in EDGES:
        if kind == "pipe":
            length = round(chain[b][0] - chain[a][0], 6)
            doc["pipes"].append({
                "id": eid, "from": a, "to": b, "length_km": length, "diameter": DIAMETER,
                "flow_min": PIPE_FLOW[0], "flow_max": PIPE_FLOW[1], "beta": BETA,
                "flow_exponent": FLOW_EXPONENT, "roughness": ROUGHNESS,
            })
            prov[f"/pipes/{eid}/length_km"] = FIGURE
            prov[f"/pipes/{eid}/diameter"] = PAPER_TABLE
            prov[f"/pipes/{eid}/flow_min"] = PAPER_TABLE
            prov[f"/pipes/{eid}/flow_max"] = PAPER_TABLE
            prov[f"/pipes/{eid}/beta"] = PAPER_TABLE
            prov[f"/pipes/{eid}/flow_exponent"] = PAPER_TABLE
            prov[f"/pipes/{eid}/roughness"] = ASSUMED
        else:
            doc["pumps"].append({
                "id": eid, "from": a, "to": b, "a0": PUMP_A0, "a1": PUMP_A1,
                "q_nom": PUMP_Q_NOM, "speed_nom": PUMP_SPEED_NOM, "eff_nom": PUMP_EFF_NOM,
                "electricity_price": ELECTRICITY[k_pump],
                "head_gain_min": PUMP_HEAD_GAIN[0], "head_gain_max": PUMP_HEAD_GAIN[1],
                "motor_eff": 0.95, "transmission_eff": 0.95,
                "flow_factor_lo": PUMP_FLOW_FACTOR[0], "flow_factor_hi": PUMP_FLOW_FACTOR[1],
                "speed_factor_lo": PUMP_SPEED[0] / PUMP_SPEED_NOM,
                "speed_factor_hi": PUMP_SPEED[1] / PUMP_SPEED_NOM,
                "eff_factor_lo": PUMP_EFF_MIN / PUMP_EFF_NOM,
            })
            k_pump += 1
            for key in ("a0", "a1", "q_nom", "speed_nom", "eff_nom", "electricity_price",
                        "speed_factor_lo", "speed_factor_hi", "eff_factor_lo"):
                prov[f"/pumps/{eid}/{key}"] = PAPER_TABLE
            for key in ("head_gain_min", "head_gain_max", "motor_eff", "transmission_eff",
                        "flow_factor_lo", "flow_factor_hi"):
                prov[f"/pumps/{eid}/{key}"] = ASSUMED

    notes = (
        "Chainages and elevations are approximate readings of a route profile plot.",
        "Pump flow-factor lower bound relaxed to 0.1 so that the published low-volume solution is reachable.",
        "Pump efficiency lower factor set to 0.60/0.87 to reproduce the tabulated 60% floor.",
        "Pump head-gain window, roughness and motor/transmission efficiencies are not published.",
        "F1 allocation: 2521 m3/h split between consumers in proportion to their bid boxes;"
        " producers N9 and N18 at their minimum, N1 carries the rest.",
        "Station spacing is chosen so that the F1 allocation is hydraulically feasible with"
        " every pump at or above its minimum speed.",
    )
    return CaseManifest(CASE_ID, doc, prov, _f1_allocation(), notes)


def total_length_km(manifest: CaseManifest) -> float:
    return sum(p["length_km"] for p in manifest.document["pipes"])


def data_dir() -> Path:
    return Path(__file__).with_name("data")


def load_seaway() -> Network:
    """The shipped case file, parsed and validated."""
    from .network import load_network

    return load_network(data_dir() / "seaway.json")


def load_f1_allocation(path=None) -> dict[str, tuple[float, float]]:
    """Fixed allocation file (m3/h) converted to ``{node: (s, d)}`` in m3/s."""
    p = Path(path) if path is not None else data_dir() / "seaway.f1_allocation.json"
    raw = json.loads(p.read_text())
    body = raw.get("allocation", raw)
    scale = 1.0 / 3600.0 if raw.get("units", "m3/h") == "m3/h" else 1.0
    return {nid: (float(v.get("s", 0.0)) * scale, float(v.get("d", 0.0)) * scale) for nid, v in body.items()}


def check_manifest(manifest: CaseManifest) -> list[str]:
    """Problems with a manifest: untagged numbers, validation errors."""
    issues = []
    for path in _numeric_paths(manifest.document):
        tag = manifest.provenance.get(path)
        if tag not in PROVENANCE_TAGS:
            issues.append(f"{path}: missing provenance tag")
    for diag in validate_network(manifest.network()):
        if diag.severity == "error":
            issues.append(str(diag))
    return issues


def _numeric_paths(doc: dict) -> list[str]:
    out = []
    for key, value in doc["fluid"].items():
        out.append(f"/fluid/{key}")
    for group in ("nodes", "pipes", "pumps"):
        for item in doc[group]:
            for key, value in item.items():
                if isinstance(value, dict):
                    out.extend(f"/{group}/{item['id']}/{key}/{k}" for k in value)
                elif isinstance(value, (int, float)) and not isinstance(value, bool):
                    out.append(f"/{group}/{item['id']}/{key}")
    return out
