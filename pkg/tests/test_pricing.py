import csv
import io
import math

import numpy as np
import pytest

from builders import build, chain3_doc, parallel_pair_doc, two_node_pipe_doc
from petroflow.formulation import FormulationKind, build_nlp, objective_terms
from petroflow.pricing import (
    PricingError,
    SweepSpec,
    apply_parameter,
    dual_consistency_check,
    nodal_prices,
    parse_path,
    sweep,
    value_range,
)
from petroflow.solver import SolverOptions, SolveStatus, solve


def solved(doc, kind=None):
    net = build(doc)
    p = build_nlp(net, kind or FormulationKind.f3())
    r = solve(p)
    return net, p, r


class TestNodalPrices:
    def test_uncongested_pipe_clears_at_producer_bid(self):
        net, p, r = solved(two_node_pipe_doc())
        rep = nodal_prices(net, p.layout, r, problem=p)
        # gravity flow, consumer capped at q_max: the interior producer sets both prices
        assert rep.sigma["N1"] == pytest.approx(300.0, abs=1e-4)
        assert rep.sigma["N2"] == pytest.approx(300.0, abs=1e-4)
        cons = rep.participant("N2", "consumer")
        assert not cons.interior
        assert cons.quantity == pytest.approx(3600.0, abs=1e-3)
        assert cons.surplus == pytest.approx((310.0 - 300.0) * 3600.0, rel=1e-6)

    def test_layout_only_call_matches(self):
        net, p, r = solved(two_node_pipe_doc())
        a = nodal_prices(net, p.layout, r, problem=p)
        b = nodal_prices(net, p.layout, r)
        assert a.sigma == b.sigma

    def test_interior_participants_clear_at_bid(self):
        net, p, r = solved(parallel_pair_doc())
        rep = nodal_prices(net, p.layout, r, problem=p)
        for part in rep.participants:
            assert part.interior
            assert rep.sigma[part.node] == pytest.approx(part.bid, abs=1e-4)
            assert abs(part.surplus) < 1e-2

    def test_seaway_f3(self, seaway_solutions):
        problem, result = seaway_solutions["f3"]
        rep = nodal_prices(problem.network, problem.layout, result, problem=problem)
        assert rep.unique
        assert any(p.interior for p in rep.participants)
        for part in rep.participants:
            if part.interior:
                assert rep.sigma[part.node] == pytest.approx(part.bid, abs=1e-4)
            else:
                # participants at a box limit never lose money at the nodal price
                assert part.surplus >= -1e-4

    def test_seaway_f3_price_pattern(self, seaway_solutions):
        problem, result = seaway_solutions["f3"]
        rep = nodal_prices(problem.network, problem.layout, result, problem=problem)
        for nid in ("N1", "N9"):
            assert rep.sigma[nid] == pytest.approx(300.0, abs=1e-4)
        for nid in ("N15", "N23"):
            assert rep.sigma[nid] == pytest.approx(310.0, abs=1e-4)
        # the downstream producer is capped at q_max and is paid the consumers' price
        n18 = rep.participant("N18", "producer")
        assert n18.quantity == pytest.approx(2950.0, abs=1e-3)
        assert rep.sigma["N18"] == pytest.approx(310.0, abs=1e-4)

    def test_seaway_saturated_producer_price(self, seaway):
        net = apply_parameter(seaway, "producer:N9:price", 315.0)
        p = build_nlp(net, FormulationKind.f3())
        r = solve(p)
        rep = nodal_prices(net, p.layout, r, problem=p)
        assert rep.participant("N9", "producer").quantity == pytest.approx(360.0, abs=1e-3)
        assert rep.sigma["N9"] == pytest.approx(309.10363, abs=1e-4)
        assert rep.sigma["N9"] < 315.0

    def test_fixed_allocation_prices_are_flagged(self, seaway_solutions):
        problem, result = seaway_solutions["f1"]
        rep = nodal_prices(problem.network, problem.layout, result, problem=problem)
        assert not rep.unique
        assert not any(p.interior for p in rep.participants)

    def test_rejects_non_optimal(self, seaway):
        p = build_nlp(seaway, FormulationKind.f3())
        r = solve(p, SolverOptions(max_iter=2))
        assert r.status is SolveStatus.MAX_ITERATIONS
        with pytest.raises(PricingError):
            nodal_prices(seaway, p.layout, r, problem=p)


class TestParameters:
    @pytest.mark.parametrize("bad", ["producer:N1", "seller:N1:price", "producer:N1:colour",
                                     "pump:P1:speed"])
    def test_bad_paths(self, bad):
        with pytest.raises(PricingError):
            parse_path(bad)

    def test_units(self, seaway):
        net = apply_parameter(seaway, "producer:N9:q_max", 3600.0)
        assert net.node("N9").producer.q_max == pytest.approx(1.0)
        net = apply_parameter(seaway, "pump:P1:electricity_price", 0.2)
        pump = next(p for p in net.pumps if p.id == "P1")
        assert pump.electricity_price * 3.6e6 == pytest.approx(0.2)
        assert seaway.node("N9").producer.q_max != pytest.approx(1.0)

    def test_unknown_targets(self, seaway):
        with pytest.raises(PricingError):
            apply_parameter(seaway, "producer:N99:price", 1.0)
        with pytest.raises(PricingError):
            apply_parameter(seaway, "consumer:N1:price", 1.0)
        with pytest.raises(PricingError):
            apply_parameter(seaway, "pump:P99:electricity_price", 1.0)


class TestSweep:
    def test_single_point_reproduces_plain_solve(self, seaway, seaway_solutions):
        problem, result = seaway_solutions["f3"]
        price = seaway.node("N9").producer.price
        table = sweep(seaway, SweepSpec("producer:N9:price", (price,)))
        row = table.rows[0]
        assert row.optimal and row.start == "cold"
        terms = objective_terms(seaway, problem.layout, result.x)
        assert row.J_P == pytest.approx(terms.J_P, rel=1e-12)

    def test_warm_chain_and_csv(self, seaway, tmp_path):
        spec = SweepSpec("producer:N9:price", value_range(300.0, 302.0, 3))
        table = sweep(seaway, spec)
        assert [r.start for r in table.rows] == ["cold", "warm", "warm"]
        dest = tmp_path / "s.csv"
        text = table.to_csv(dest)
        assert dest.read_text() == text
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == table.header()
        assert len(rows) == 4
        assert rows[0][0] == "value" and rows[0][-2:] == ["status", "start"]
        assert all(len(r) == len(rows[0]) for r in rows)
        assert float(rows[2][0]) == 301.0
        assert rows[1][1].count("e") == 1 and len(rows[1][1].split("e")[0].split(".")[1]) == 16
        np.testing.assert_array_equal(table.column("value"), [300.0, 301.0, 302.0])

    def test_validation_errors_propagate(self, seaway):
        with pytest.raises(PricingError):
            sweep(seaway, SweepSpec("producer:N9:q_max", (-5.0,)))

    def test_spec_validation(self):
        with pytest.raises(PricingError):
            SweepSpec("producer:N9:price", ())
        with pytest.raises(PricingError):
            SweepSpec("producer:N9:price", (math.nan,))

    def test_value_range(self):
        v = value_range(280.0, 325.0, 46)
        assert len(v) == 46 and v[0] == 280.0 and v[-1] == 325.0
        assert v[1] == pytest.approx(281.0)


class TestDualCheck:
    def test_chain(self):
        net = build(chain3_doc())
        errs = []
        for delta in (1e-4, 5e-5, 2.5e-5):
            chk = dual_consistency_check(net, FormulationKind.f3(), "N3", delta=delta)
            assert not chk.inconclusive, chk.reason
            errs.append(chk.relative_error)
        assert errs[0] <= 1e-2
        assert errs[1] < errs[0]

    def test_capacity_limit_is_inconclusive(self):
        # pumping cost is ignored here, so the withdrawal is pushed to the hydraulic limit
        net = build(chain3_doc())
        chk = dual_consistency_check(net, FormulationKind.f2(), "N3")
        assert chk.inconclusive
        assert math.isnan(chk.fd_price)

    def test_requires_consumer(self):
        net = build(chain3_doc())
        with pytest.raises(PricingError):
            dual_consistency_check(net, FormulationKind.f3(), "N2")
