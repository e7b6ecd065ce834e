import dataclasses
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import HOURS, bus_model
from relgrid.mcs import McsConfig
from relgrid.planner import (
    CandidateGrid,
    CostModel,
    DesignCandidate,
    FrontierPoint,
    PlanError,
    ProtectionRules,
    ReliabilityTargets,
    evaluate,
    instantiate,
    lcoe,
    npc,
    pareto_front,
    protection_feasibility,
    search,
    storage_duration_recommendation,
    storage_energy_bound,
    violations,
)
from relgrid.scenario_engine import Scenario, ScarcityEvent, TimeSeries, assemble, cf_series
from relgrid.system_model import Priority


def solar_day(days=2, sid="s", scale=1.0):
    h = np.arange(24 * days) % 24
    pv = np.clip(np.sin((h - 6) / 12 * np.pi), 0, 1) * scale
    load = 0.6 + 0.4 * ((h >= 17) & (h <= 22))
    return Scenario(sid, TimeSeries(load), cf_series(pv), cf_series(np.zeros(h.size)))


TEMPLATE = bus_model(pv_kw=1, dg_kw=1, storage=(1, 1), priorities=(Priority.CRITICAL, Priority.NON_CRITICAL))
SCEN = assemble([solar_day(sid="sunny"), solar_day(sid="dull", scale=0.3)], [3, 1])
COSTS = CostModel(capex={"pv": 900, "dispatchable": 500, "storage_energy": 250, "storage_power": 100},
                  fixed_opex={"dispatchable": 20}, fuel_cost=0.3, voll=5.0, horizon_years=10)


def exhaustive(grid, targets, cost_model, scen=SCEN):
    best = None
    for idx in itertools.product(*(range(n) for n in grid.shape)):
        e = evaluate(grid.design(idx), TEMPLATE, scen, None, cost_model)
        if e.capital_cost > cost_model.budget_max or violations(e, targets):
            continue
        if best is None or (e.lifecycle_cost, idx) < best[0]:
            best = ((e.lifecycle_cost, idx), e.design)
    return None if best is None else best[1]


# -------------------------------------------------------------- economics


def test_npc_and_lcoe():
    assert npc(100, 0.1, 2, 50) == pytest.approx(50 + 100 / 1.1 + 100 / 1.21)
    assert npc([10, 20], 0.0, 2) == 30
    assert lcoe(100, 1000, 0.1, 2, 50) == pytest.approx((50 + 100 / 1.1 + 100 / 1.21) / (1000 / 1.1 + 1000 / 1.21))
    with pytest.raises(PlanError):
        lcoe(1, 0, 0.1, 2)


def test_cost_model_validation():
    with pytest.raises(PlanError, match="unknown technology"):
        CostModel(capex={"nuclear": 1})
    with pytest.raises(PlanError):
        CostModel(discount_rate=1.0)
    assert CostModel.from_dict({"budget_max": None}).budget_max == math.inf


def test_evaluation_cost_oracle():
    d = DesignCandidate(dispatchable_kw=30)
    e = evaluate(d, TEMPLATE, SCEN, None, COSTS)
    # DG alone serves every kWh of the 20 kW peak
    demand_per_yr = 20 * (0.6 * 18 + 1.0 * 6) / 24 * HOURS
    assert e.eens == pytest.approx(0.0) and e.lole == 0
    assert e.annual["fuel"] == pytest.approx(0.3 * demand_per_yr)
    assert e.annual["fixed_opex"] == pytest.approx(600)
    assert e.capital_cost == 15000
    assert e.lifecycle_cost == pytest.approx(npc(0.3 * demand_per_yr + 600, 0.05, 10, 15000))
    assert e.lcoe == pytest.approx(e.lifecycle_cost / (demand_per_yr * COSTS.discount_factors().sum()))


# ------------------------------------------------------------ instantiate


def test_instantiate_scales_and_drops():
    m = instantiate(DesignCandidate(pv_kw=50, storage_kwh=100, storage_kw=25), TEMPLATE)
    assert [(g.id, g.rated_capacity) for g in m.generators] == [("PV", 50)]
    s = m.storage_units[0]
    assert (s.energy_capacity, s.power_rating) == (100, 25)
    assert instantiate(DesignCandidate(storage_kwh=100), TEMPLATE).storage_units == ()
    g = bus_model(dg_kw=1, grid=True)
    assert instantiate(DesignCandidate(dispatchable_kw=1, grid_connected=False), g).grid_tie is None
    with pytest.raises(PlanError, match="wind"):
        instantiate(DesignCandidate(wind_kw=5), TEMPLATE)


def test_protection_rules():
    m = instantiate(DesignCandidate(pv_kw=10), TEMPLATE)
    chk = protection_feasibility(DesignCandidate(pv_kw=10), m, ProtectionRules(min_fault_ratio=1.0))
    assert not chk.passed and chk.reasons == ("fault-current ratio",) and chk.fault_ratio == pytest.approx(0.6)
    chk = protection_feasibility(DesignCandidate(grid_connected=True), m)
    assert chk.reasons == ("grid tie missing",)


# ----------------------------------------------------------------- pareto


def test_pareto_hand_example():
    d = DesignCandidate()
    pts = [FrontierPoint(d, 1, 5, 5), FrontierPoint(d, 2, 1, 5), FrontierPoint(d, 3, 6, 6), FrontierPoint(d, 1, 5, 5)]
    assert [(p.cost, p.eens) for p in pareto_front(pts)] == [(1, 5), (2, 1)]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=25))
def test_pareto_is_exactly_the_non_dominated_set(triples):
    pts = [FrontierPoint(DesignCandidate(), *t) for t in triples]
    front = {(p.cost, p.eens, p.lole) for p in pareto_front(pts)}

    def dominated(a):
        return any(all(x <= y for x, y in zip(b, a)) and b != a for b in triples)

    assert front == {t for t in triples if not dominated(t)}


# ----------------------------------------------------------------- search


GRID = CandidateGrid(pv_kw=(0, 20, 40), dispatchable_kw=(0, 10, 20), storage_kwh=(0, 40), storage_kw=(20,))


@pytest.mark.parametrize("targets", [
    ReliabilityTargets(lole_max=2.4 * 365),
    ReliabilityTargets(eens_max=500.0),
    ReliabilityTargets(tier_shed_max={Priority.CRITICAL: 0.0}),
    ReliabilityTargets(),
])
def test_search_matches_exhaustive(targets):
    res = search(GRID, targets, COSTS, TEMPLATE, SCEN)
    assert res.chosen == exhaustive(GRID, targets, COSTS)
    events = [e["event"] for e in res.stage_log]
    assert [e["stage"] for e in res.stage_log][0:4] == [1, 2, 3, 4] and events[-1] == "done"


def test_coarse_search_still_lands_on_optimum_here():
    fine = search(GRID, ReliabilityTargets(eens_max=500.0), COSTS, TEMPLATE, SCEN)
    coarse = search(GRID, ReliabilityTargets(eens_max=500.0), COSTS, TEMPLATE, SCEN, coarse_stride=2)
    assert coarse.chosen == fine.chosen and coarse.evaluated <= len(GRID)


def test_lole_gate_rejects_designs_over_benchmark():
    res = search(GRID, ReliabilityTargets(lole_max=2.4), COSTS, TEMPLATE, SCEN)
    assert res.feasible and res.chosen_evaluation.lole <= 2.4
    bad = search(CandidateGrid(pv_kw=(0, 20), dispatchable_kw=(0, 10)), ReliabilityTargets(lole_max=2.4),
                 COSTS, TEMPLATE, SCEN)
    assert not bad.feasible and bad.diagnostic.lole > 2.4 and "No candidate" in bad.summary()


def test_budget_and_frontier():
    cm = dataclasses.replace(COSTS, budget_max=15000)
    res = search(GRID, ReliabilityTargets(), cm, TEMPLATE, SCEN)
    assert res.chosen_evaluation.capital_cost <= 15000
    assert all(cm.capital_cost(p.design) <= 15000 for p in res.frontier)
    costs = [p.cost for p in res.frontier]
    assert costs == sorted(costs)
    assert res.frontier_csv().splitlines()[0].startswith("cost,eens_kwh_per_yr,lole_h_per_yr,pv_kw")


def test_scarcity_bound_excludes_small_storage():
    res = search(GRID, ReliabilityTargets(), COSTS, TEMPLATE, SCEN, min_storage_kwh=10)
    assert res.chosen.storage_kwh >= 10
    assert res.stage_log[2]["excluded"] == 9


def test_protection_feedback_reselects():
    grid = dataclasses.replace(GRID, storage_kw=(20, 40))
    plain = search(grid, ReliabilityTargets(), COSTS, TEMPLATE, SCEN)
    res = search(grid, ReliabilityTargets(), COSTS, TEMPLATE, SCEN, protection=ProtectionRules(min_fault_ratio=4.0))
    # the unconstrained optimum has (40 + 20) * 1.2 / 20 = 3.6 < 4
    assert plain.chosen.storage_kw == 20
    assert res.chosen == dataclasses.replace(plain.chosen, storage_kw=40)
    assert [e["event"] for e in res.stage_log].count("feedback to stage 3") == 1


def test_mcs_verification_tightens_targets():
    tmpl = dataclasses.replace(TEMPLATE, components=tuple(
        dataclasses.replace(c, failure_rate=4.0, repair_rate=HOURS / 10) if c.id == "F" else c
        for c in TEMPLATE.components))
    targets = ReliabilityTargets(lole_max=20.0)
    verify = McsConfig(iterations=50, seed=3)
    res = search(GRID, targets, COSTS, tmpl, SCEN, verify_mcs=verify, max_outer_loops=3)
    events = [e["event"] for e in res.stage_log]
    # feeder outages add about 40 h/yr that no resource choice can remove
    assert "feedback to stage 5" in events
    assert res.targets.lole_max < 20.0
    assert res.verified is not True


def test_grid_validation():
    with pytest.raises(PlanError, match="empty"):
        CandidateGrid(pv_kw=())
    with pytest.raises(PlanError, match="unknown"):
        CandidateGrid.from_dict({"solar": [1]})
    g = CandidateGrid(pv_kw=(0, 1, 2, 3, 4))
    assert [i[0] for i in g.indices(3)] == [0, 3, 4]


def test_storage_sizing_helpers():
    ev = [ScarcityEvent(0, d, 0.0) for d in (10, 20, 30, 40, 100)]
    assert storage_duration_recommendation(ev, 0.95) == 100
    assert storage_energy_bound(72, 5) == 360
