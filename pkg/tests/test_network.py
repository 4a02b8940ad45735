import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import build, document, node, pipe, pump, two_node_pipe_doc
from petroflow.network import (
    NetworkFormatError,
    NetworkFormatWarning,
    network_from_dict,
    parse_network,
    serialize_network,
    validate_network,
)


def errors(net):
    return [d for d in validate_network(net) if d.severity == "error"]


class TestParse:
    def test_minimal_two_node_document(self):
        net = build(two_node_pipe_doc())
        assert (len(net.nodes), len(net.pipes), len(net.pumps)) == (2, 1, 0)

    def test_flow_bounds_converted_from_m3_per_hour(self):
        net = build(two_node_pipe_doc())
        assert net.pipes[0].flow_max == pytest.approx(1.3889, abs=5e-5)
        assert net.pipes[0].flow_max == 5000.0 / 3600.0

    def test_length_in_km_and_m_agree(self):
        doc_km = two_node_pipe_doc()
        doc_m = two_node_pipe_doc()
        del doc_m["pipes"][0]["length_km"]
        doc_m["pipes"][0]["length_m"] = 50000.0
        assert build(doc_km).pipes[0].length == build(doc_m).pipes[0].length == 50000.0

    def test_both_length_keys_rejected(self):
        doc = two_node_pipe_doc()
        doc["pipes"][0]["length_m"] = 1.0
        with pytest.raises(NetworkFormatError):
            build(doc)

    def test_electricity_price_stored_per_joule(self):
        doc = document([node("A", 0.0), node("B", 0.0)], pumps=[pump("P1", "A", "B")])
        assert build(doc).pumps[0].electricity_price * 3.6e6 == pytest.approx(0.12, rel=1e-15)

    def test_syntax_error_reports_position(self):
        with pytest.raises(NetworkFormatError) as info:
            parse_network('{"fluid": {"density": 1,\n  "kinematic_viscosity": }')
        assert info.value.line == 2

    def test_unknown_node_reference(self):
        doc = two_node_pipe_doc()
        doc["pipes"][0]["to"] = "N9"
        with pytest.raises(NetworkFormatError, match="unknown node"):
            build(doc)

    def test_duplicate_node_id(self):
        doc = two_node_pipe_doc()
        doc["nodes"][1]["id"] = "N1"
        with pytest.raises(NetworkFormatError, match="duplicate"):
            build(doc)

    def test_non_finite_number(self):
        text = json.dumps(two_node_pipe_doc()).replace('"elevation": 100.0', '"elevation": NaN')
        with pytest.raises(NetworkFormatError):
            parse_network(text)

    def test_unknown_key_strict_and_lenient(self):
        doc = two_node_pipe_doc()
        doc["nodes"][0]["colour"] = "red"
        with pytest.raises(NetworkFormatError):
            network_from_dict(doc)
        with pytest.warns(NetworkFormatWarning):
            net = network_from_dict(doc, strict=False)
        assert net.node("N1").elevation == 100.0

    def test_seaway_topology(self, seaway):
        assert (len(seaway.nodes), len(seaway.pipes), len(seaway.pumps)) == (23, 13, 9)
        assert [n.id for n in seaway.producers] == ["N1", "N9", "N18"]
        assert [n.id for n in seaway.consumers] == ["N15", "N23"]


class TestValidate:
    def test_seaway_has_no_diagnostics(self, seaway):
        assert validate_network(seaway) == []

    def test_disconnected_graph(self):
        doc = two_node_pipe_doc()
        doc["nodes"].append(node("N3", 0.0))
        assert any("graph not connected" in d.message for d in errors(build(doc)))

    def test_bid_with_min_above_max(self):
        doc = two_node_pipe_doc()
        doc["nodes"][0]["producer"]["q_min"] = 6000.0
        diags = errors(build(doc))
        assert any(d.element == "N1:producer" and "q_min" in d.message for d in diags)

    def test_aggregate_supply_demand_sanity(self):
        doc = two_node_pipe_doc()
        doc["nodes"][0]["producer"]["q_min"] = 4000.0
        assert any("minimum supply" in d.message for d in errors(build(doc)))

    def test_pump_window_warning(self):
        doc = document([node("A", 0.0), node("B", 0.0), node("C", 0.0)],
                       [pipe("L1", "B", "C", 10.0, flow_min=500.0, flow_max=1000.0)],
                       [pump("P1", "A", "B", flow_factor_lo=0.8)])
        diags = validate_network(build(doc))
        assert [d.severity for d in diags] == ["warning"]

    def test_parallel_edges_allowed(self):
        doc = document([node("A", 0.0), node("B", 0.0)],
                       [pipe("L1", "A", "B", 10.0)], [pump("P1", "A", "B")])
        assert errors(build(doc)) == []

    def test_pump_endpoints_coincide(self):
        doc = document([node("A", 0.0), node("B", 0.0)],
                       [pipe("L1", "A", "B", 10.0)], [pump("P1", "A", "A")])
        assert any(d.element == "P1" for d in errors(build(doc)))

    def test_pure_and_deterministic(self):
        net = build(two_node_pipe_doc())
        assert validate_network(net) == validate_network(net)


finite = st.floats(min_value=0.01, max_value=1e4, allow_nan=False, allow_infinity=False)


class TestRoundTrip:
    def test_seaway_round_trip(self, seaway):
        assert parse_network(serialize_network(seaway)) == seaway

    @settings(max_examples=60, deadline=None)
    @given(z=st.floats(-500, 500), length=finite, qmax=finite, price=st.floats(0, 1000),
           cprice=st.floats(0, 1.0), a1=st.floats(0, 1e-3))
    def test_random_documents_round_trip(self, z, length, qmax, price, cprice, a1):
        doc = document(
            [node("A", z, producer=(price, 0.0, qmax)), node("B", 0.0, consumer=(price, 0.0, qmax))],
            [pipe("L1", "A", "B", length, flow_min=min(1.0, qmax), flow_max=qmax)],
            [pump("P1", "B", "A", a1=a1, electricity_price=cprice)],
        )
        net = build(doc)
        again = parse_network(serialize_network(net))
        assert again == net
        assert math.isclose(again.pipes[0].length, length * 1000.0, rel_tol=1e-15)
