import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import HOURS, bus_model, random_fixture, radial_model
from relgrid.dispatch import run
from relgrid.indices import (
    CONTEXTS,
    DamageCurve,
    IndexReport,
    IndicesError,
    adequacy_deterministic,
    adequacy_from_series,
    adequacy_probabilistic,
    advise,
    customer_indices,
    customer_indices_from_rates,
    energy_margin,
    interruption_cost,
    load_point_analytic,
    reserve_margin,
)
from relgrid.mcs import Interruption, OutageLog
from relgrid.scenario_engine import assemble, constant_scenario
from relgrid.system_model import NotRadialError


# ------------------------------------------------------------ load points


def test_radial_closed_form():
    lp = load_point_analytic(radial_model([0.1, 0.2, 0.3], [10, 5, 20]))
    assert lp.lambda_i[0] == pytest.approx(0.6)
    assert lp.u_i[0] == pytest.approx(8.0)
    assert lp.r_i[0] == pytest.approx(8.0 / 0.6)
    assert load_point_analytic(radial_model([0.0], [5])).r_i == [None]


def test_meshed_needs_mcs(three_bus):
    with pytest.raises(NotRadialError, match="MCS"):
        load_point_analytic(three_bus)


# -------------------------------------------------------------- customers


def _oracle(model, logs, thr, n):
    """Loop-by-loop customer indices."""
    counts = {lp.id: lp.customer_count for lp in model.load_points}
    total = sum(counts.values())
    years = logs[0].horizon_hours / HOURS
    ci = cd = cm = aff = cemi = 0.0
    for log in logs:
        k = {lp: 0 for lp in counts}
        for it in log.interruptions:
            if it.end - it.start < thr:
                cm += counts[it.load_point]
            else:
                k[it.load_point] += 1
                ci += counts[it.load_point]
                cd += counts[it.load_point] * (it.end - it.start)
        aff += sum(counts[lp] for lp in k if k[lp] > 0)
        cemi += sum(counts[lp] for lp in k if k[lp] > n)
    N = len(logs)
    return (ci / N / years / total, cd / N / years / total, cm / N / years / total,
            (ci / N / years) / (aff / N) if aff else None, cemi / N / total)


def test_customer_indices_hand_example():
    m = radial_model([1.0], [1.0], customers=100)
    m = dataclasses.replace(m, load_points=m.load_points + (dataclasses.replace(m.load_points[0], id="B",
                                                                                 customer_count=300),))
    logs = [OutageLog(0, "s", HOURS, (), (Interruption("LP", 0, 2, 0, "C0"), Interruption("LP", 5, 5.01, 0, "C0"))),
            OutageLog(1, "s", HOURS, (), (Interruption("B", 0, 1, 0, "C0"),))]
    ci = customer_indices(logs, m, n_for_cemi=0)
    # per iteration: 100 and 300 customer interruptions; 200 and 300 customer hours
    assert ci.saifi == pytest.approx(200 / 400)
    assert ci.saidi == pytest.approx(250 / 400)
    assert ci.maifi == pytest.approx(50 / 400)
    assert ci.caifi == pytest.approx(200 / 200)
    assert ci.caidi == pytest.approx(1.25)
    assert ci.cemi_n == pytest.approx(200 / 400)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 3))
def test_customer_indices_match_loop_oracle(seed, n):
    model, logs = random_fixture(np.random.default_rng(seed))
    ci = customer_indices(logs, model, n_for_cemi=n)
    saifi, saidi, maifi, caifi, cemi = _oracle(model, logs, 5 / 60, n)
    assert ci.saifi == pytest.approx(saifi) and ci.saidi == pytest.approx(saidi)
    assert ci.maifi == pytest.approx(maifi) and ci.cemi_n == pytest.approx(cemi)
    assert (ci.caifi is None) == (caifi is None)
    if caifi is not None:
        assert ci.caifi == pytest.approx(caifi) and ci.caifi >= ci.saifi


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 50))
def test_customer_scale_invariance(seed, factor):
    model, logs = random_fixture(np.random.default_rng(seed))
    scaled = dataclasses.replace(model, load_points=tuple(
        dataclasses.replace(lp, customer_count=lp.customer_count * factor) for lp in model.load_points))
    a, b = customer_indices(logs, model), customer_indices(logs, scaled)
    for x, y in ((a.saifi, b.saifi), (a.saidi, b.saidi), (a.caidi, b.caidi)):
        assert y == pytest.approx(x, rel=1e-12)


def test_empty_logs_and_zero_customers():
    m = radial_model([1.0], [1.0])
    ci = customer_indices([], m)
    assert (ci.saifi, ci.saidi, ci.caidi, ci.caifi) == (0.0, 0.0, 0.0, None)
    zero = dataclasses.replace(m, load_points=(dataclasses.replace(m.load_points[0], customer_count=0),))
    with pytest.raises(IndicesError):
        customer_indices([], zero)


def test_indices_from_rates():
    m = radial_model([1.0], [1.0], customers=100)
    m = dataclasses.replace(m, load_points=m.load_points + (dataclasses.replace(m.load_points[0], id="B",
                                                                                 customer_count=100),))
    ci = customer_indices_from_rates(m, [2.0, 0.0], [6.0, 0.0])
    assert (ci.saifi, ci.saidi, ci.caidi, ci.caifi, ci.cemi_n) == (1.0, 3.0, 3.0, 2.0, None)


# --------------------------------------------------------------- adequacy


def test_margins():
    assert reserve_margin(115, 100) == pytest.approx(15.0)
    assert energy_margin(90, 100) == pytest.approx(-10.0)
    with pytest.raises(IndicesError):
        reserve_margin(1, 0)


def test_deterministic_adequacy_caveat():
    firm = adequacy_deterministic(bus_model(dg_kw=12), constant_scenario(24))
    assert firm.prm == pytest.approx(20.0) and firm.within_band and not firm.caveats
    assert firm.erm == pytest.approx(20.0)
    ren = adequacy_deterministic(bus_model(pv_kw=40), constant_scenario(24, pv_cf=0.2))
    assert ren.prm == pytest.approx(300.0) and ren.erm == pytest.approx(-20.0) and ren.caveats


def test_adequacy_hand_enumeration():
    a = adequacy_from_series([[0, 1, 0, 1]], [[5, 5, 5, 5]], [1.0], 1.0)
    assert (a.lolp, a.lole, a.eens, a.lpsp) == (0.5, 2.0, 2.0, 0.1)


def test_adequacy_probability_weighting():
    a = adequacy_from_series([[0, 2], [1, 1]], [[4, 4], [4, 4]], [0.25, 0.75], 0.5)
    assert a.lolp == pytest.approx((0.25 * 1 + 0.75 * 2) / 2)
    assert a.eens == pytest.approx(0.25 * 1.0 + 0.75 * 1.0)
    assert a.lole == pytest.approx(a.lolp * 2 * 0.5, rel=1e-12)
    assert a.lpsp * a.demand_energy == pytest.approx(a.eens, rel=1e-12)


def test_adequacy_from_traces():
    m = bus_model(dg_kw=6)
    ss = assemble([constant_scenario(4, sid="a"), constant_scenario(4, 0.5, sid="b")], [1, 1])
    traces = {s.id: run(m, s) for s in ss}
    a = adequacy_probabilistic(traces, ss)
    assert a.lolp == pytest.approx(0.5) and a.eens == pytest.approx(0.5 * 16)
    with pytest.raises(IndicesError, match="missing"):
        adequacy_probabilistic({"a": traces["a"]}, ss)


# ------------------------------------------------------------------- cost


def test_damage_curve():
    c = DamageCurve((1.0, 4.0), (10.0, 40.0))
    assert c(0.5) == pytest.approx(5.0)
    assert c(2.5) == pytest.approx(25.0)
    assert c(6.0) == pytest.approx(60.0)
    with pytest.raises(IndicesError):
        DamageCurve((2.0, 1.0), (1.0, 2.0))


def test_interruption_cost():
    cost = interruption_cost({"critical": 2.0, "non-critical": 10.0}, {"critical": 50, "essential": 5,
                                                                       "non-critical": 1},
                             {"critical": DamageCurve((1.0,), (100.0,))},
                             [("critical", 2.0), ("non-critical", 3.0)])
    assert cost.energy_cost == pytest.approx(110.0)
    assert cost.damage_cost == pytest.approx(200.0)
    assert interruption_cost([0, 0, 4.0], 2.0).total_cost == pytest.approx(8.0)


# ---------------------------------------------------------------- advisor


def test_advisor():
    assert set(CONTEXTS) == {"topology-weak-points", "adequacy", "customer-service-quality",
                             "cost-reliability-tradeoff", "regulatory"}
    a = advise("adequacy")
    assert a.rows[0].metrics == "LOLP, LOLE, LPSP"
    assert a.rows[0].guidance.startswith("Combine LOLP/LOLE with EENS")
    assert advise("regulatory").metrics == ("SAIFI", "SAIDI", "LOLE")
    assert advise("cost-reliability-tradeoff").rows[0].metrics == "EENS (with VOLL/CDF)"
    with pytest.raises(IndicesError, match="regulatory"):
        advise("nope")


# ----------------------------------------------------------------- report


def test_report_serialization():
    model, logs = random_fixture(np.random.default_rng(1), iterations=5)
    rep = IndexReport(customer=customer_indices(logs, model),
                      probabilistic=adequacy_from_series([[0, 1]], [[2, 2]], [1.0], 1.0),
                      deterministic=adequacy_deterministic(bus_model(pv_kw=20), constant_scenario(2, pv_cf=0.5)))
    d = json.loads(rep.to_json())
    assert d["adequacy_probabilistic"]["LOLP"] == 0.5 and d["caveats"]
    lines = rep.to_csv().splitlines()
    assert lines[0] == "scope,index,value,unit" and any(line.startswith("system,SAIFI,") for line in lines)
