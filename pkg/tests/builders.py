"""Small hand-made networks shared by the test modules."""

from __future__ import annotations

import copy

from petroflow.network import network_from_dict

FLUID = {"density": 827.0, "kinematic_viscosity": 4.9e-6}

PUMP = {
    "a0": 276.8, "a1": 7.1e-6, "q_nom": 3600.0, "speed_nom": 3000.0, "eff_nom": 0.87,
    "electricity_price": 0.12, "head_gain_min": 50.0, "head_gain_max": 450.0,
    "motor_eff": 0.95, "transmission_eff": 0.95, "flow_factor_lo": 0.1, "flow_factor_hi": 1.2,
    "speed_factor_lo": 0.8, "speed_factor_hi": 1.2, "eff_factor_lo": 0.60 / 0.87,
}


def pipe(eid, a, b, length_km, flow_min=500.0, flow_max=5000.0):
    return {"id": eid, "from": a, "to": b, "length_km": length_km, "diameter": 0.76,
            "flow_min": flow_min, "flow_max": flow_max, "beta": 0.0246, "flow_exponent": 0.25,
            "roughness": 4.5e-5}


def pump(eid, a, b, **over):
    return {"id": eid, "from": a, "to": b, **PUMP, **over}


def node(nid, z, producer=None, consumer=None, head=(30.0, 740.0)):
    out = {"id": nid, "elevation": z, "head_min": head[0], "head_max": head[1]}
    if producer is not None:
        out["producer"] = dict(zip(("price", "q_min", "q_max"), producer))
    if consumer is not None:
        out["consumer"] = dict(zip(("price", "q_min", "q_max"), consumer))
    return out


def document(nodes, pipes=(), pumps=()):
    return {"fluid": dict(FLUID), "nodes": list(nodes), "pipes": list(pipes), "pumps": list(pumps)}


def two_node_pipe_doc():
    """Producer N1 feeding consumer N2 through one pipe; no pumps."""
    return document(
        [node("N1", 100.0, producer=(300.0, 360.0, 5000.0)), node("N2", 0.0, consumer=(310.0, 720.0, 3600.0))],
        [pipe("L1", "N1", "N2", 50.0)],
    )


def parallel_pair_doc():
    """Two nodes joined by one pipe and one pump in parallel.

    N2 sits 300 m below N1, so the pipe runs forward under gravity while the
    pump lifts pressure head between the same two nodes.  Fixing the
    allocation ``s`` and the pump speed determines every other variable.
    """
    return document(
        [node("N1", 300.0, producer=(300.0, 3600.0, 9000.0), head=(30.0, 740.0)),
         node("N2", 0.0, consumer=(300.05, 3600.0, 9000.0), head=(30.0, 740.0))],
        [pipe("L1", "N1", "N2", 20.0, flow_min=500.0, flow_max=9000.0)],
        [pump("P1", "N1", "N2")],
    )


def chain3_doc(consumer_price=300.08):
    """Producer N1, pump P1 to N2, pipe L1 to the consumer at N3."""
    return document(
        [node("N1", 0.0, producer=(300.0, 360.0, 5000.0)),
         node("N2", 0.0),
         node("N3", 0.0, consumer=(consumer_price, 720.0, 5000.0))],
        [pipe("L1", "N2", "N3", 150.0)],
        [pump("P1", "N1", "N2")],
    )


def build(doc):
    return network_from_dict(copy.deepcopy(doc))
