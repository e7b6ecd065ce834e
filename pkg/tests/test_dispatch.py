import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bus_model
from relgrid.dispatch import (
    DispatchPolicy,
    apply_reserve_target,
    read_trace_csv,
    run,
)
from relgrid.scenario_engine import Scenario, TimeSeries, cf_series, constant_scenario
from relgrid.system_model import ModelError, Priority

CRIT, ESS, NC = 0, 1, 2


def test_storage_covers_deficit_until_empty():
    m = bus_model(pv_kw=10, storage=(20, 5))
    tr = run(m, constant_scenario(6, pv_cf=0.5))
    # 5 kW from PV, 5 kW from a 20 kWh battery: four hours, then shortfall
    assert tr.storage_discharge.tolist() == [5, 5, 5, 5, 0, 0]
    assert tr.unserved.tolist() == [0, 0, 0, 0, 5, 5]
    assert np.allclose(tr.soc[:, 0], [0.75, 0.5, 0.25, 0.0, 0.0, 0.0])


def test_dispatchable_then_shed():
    tr = run(bus_model(dg_kw=4), constant_scenario(2))
    assert tr.dispatchable_output.tolist() == [4, 4]
    assert tr.shed_by_tier[:, NC].tolist() == [6, 6]
    assert tr.dispatchable_cost.tolist() == pytest.approx([1.2, 1.2])


def test_shedding_follows_priority():
    m = bus_model(dg_kw=15, priorities=(Priority.CRITICAL, Priority.NON_CRITICAL))
    tr = run(m, constant_scenario(1))
    assert tr.shed_by_tier[0].tolist() == [0, 0, 5]
    step = tr.step(0)
    assert step.shed_by_tier["non-critical"] == 5 and step.mode == "islanded"


def test_grid_import_limit_and_export():
    tr = run(bus_model(grid=True, import_limit=3), constant_scenario(1))
    assert (tr.grid_import[0], tr.unserved[0]) == (3, 7)
    tr = run(bus_model(pv_kw=20, grid=True, export_limit=4, storage=(10, 10)), constant_scenario(1, pv_cf=1.0))
    # battery starts full, so surplus 10 kW splits into 4 exported and 6 curtailed
    assert (tr.grid_export[0], tr.renewable_curtailed[0], tr.storage_charge[0]) == (4, 6, 0)


def test_charging_respects_power_and_room():
    m = bus_model(pv_kw=30, storage=(10, 4))
    m = m.__class__(m.components, m.load_points, m.generators,
                    (m.storage_units[0].__class__("B", 10, 4, 1.0, 1.0, 0.0, 1.0, 0.0, "BC"),))
    tr = run(m, constant_scenario(4, pv_cf=1.0))
    assert tr.storage_charge == pytest.approx([4, 4, 2, 0])
    assert tr.soc[-1, 0] == pytest.approx(1.0)


def test_reserve_keeps_band_for_critical():
    prios = (Priority.CRITICAL, Priority.NON_CRITICAL)
    m = bus_model(pv_kw=1, storage=(20, 20), priorities=prios)
    sc = constant_scenario(3, pv_cf=0.0)
    plain = run(m, sc)
    held = run(m, sc, DispatchPolicy(reserve_soc_target=0.5, reserve_lookahead_hours=24))
    assert held.reserve_active.all() and not plain.reserve_active.any()
    assert plain.storage_discharge.tolist() == [20, 0, 0]
    assert plain.shed_by_tier[:, CRIT].tolist() == [0, 10, 10]
    assert held.shed_by_tier[:, CRIT].tolist() == [0, 0, 10]
    assert held.shed_by_tier[:, NC].tolist() == [10, 10, 10]


def test_reserve_rule_needs_renewables():
    m = bus_model(storage=(20, 20))
    tr = run(m, constant_scenario(3), DispatchPolicy(reserve_soc_target=0.5, reserve_lookahead_hours=24))
    assert not tr.reserve_active.any()


def test_apply_reserve_target():
    p = DispatchPolicy(reserve_soc_target=0.6, scarcity_threshold=0.2)
    assert apply_reserve_target(p, [0.1, 0.1], 0.1) == 0.6
    assert apply_reserve_target(p, [0.5, 0.5], 0.1) == 0.1
    assert apply_reserve_target(DispatchPolicy(), [0.0], 0.1) == 0.1


def test_policy_validation():
    with pytest.raises(ModelError):
        DispatchPolicy(merit_order=("storage", "renewable", "dispatchable", "grid")).check()
    with pytest.raises(ModelError):
        DispatchPolicy(shedding_order=(Priority.CRITICAL,)).check()
    p = DispatchPolicy.from_dict({"shedding_order": ["critical", "essential", "non-critical"]})
    assert p.shedding_order[0] is Priority.CRITICAL


def test_availability_mask_and_transitions():
    m = bus_model(grid=True)
    avail = {"GT": [True, True, True, False, False, False, True, True]}
    tr = run(m, constant_scenario(8), availability=avail)
    assert tr.transitions == [(3, "islanding", "unplanned"), (6, "reconnection", "unplanned")]
    assert tr.unserved.tolist() == [0, 0, 0, 10, 10, 10, 0, 0]
    tr = run(m, constant_scenario(3), availability={"F": [True, False, True]})
    assert tr.unsupplied_by_tier.sum(axis=1).tolist() == [0, 10, 0]
    assert tr.unserved_by_lp[:, 0].tolist() == [0, 10, 0]
    with pytest.raises(ModelError):
        run(m, constant_scenario(3), availability={"F": [True]})


def test_three_bus_trace_csv_round_trip(tmp_path, three_bus):
    rng = np.random.default_rng(0)
    T = 48
    sc = Scenario("s", TimeSeries(rng.uniform(0.3, 1.2, T)), cf_series(rng.uniform(0, 1, T)),
                  cf_series(np.zeros(T)))
    tr = run(three_bus, sc)
    p = tmp_path / "trace.csv"
    tr.to_csv(p)
    back = read_trace_csv(p, "s")
    assert np.array_equal(back.load, tr.load) and np.array_equal(back.unserved, tr.unserved)
    assert np.all(np.abs(tr.balance_residual()) < 1e-9)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0, 100), st.floats(0, 50), st.floats(0, 200), st.floats(0, 60), st.booleans(),
    st.lists(st.tuples(st.floats(0, 1.5), st.floats(0, 1)), min_size=1, max_size=30),
    st.lists(st.booleans(), min_size=30, max_size=30),
)
def test_balance_and_bounds(pv, dg, e, p, grid, steps, feeder_up):
    m = bus_model(pv_kw=pv, dg_kw=dg, storage=(e, p) if e > 0 else None, grid=grid, import_limit=20,
                  export_limit=5, priorities=(Priority.CRITICAL, Priority.ESSENTIAL, Priority.NON_CRITICAL))
    load, cf = zip(*steps)
    sc = Scenario("x", TimeSeries(np.array(load)), cf_series(np.array(cf)), cf_series(np.zeros(len(cf))))
    tr = run(m, sc, availability={"F": feeder_up[:len(cf)]})
    assert np.all(np.abs(tr.balance_residual()) < 1e-9)
    assert np.all(tr.unserved >= -1e-12) and np.all(tr.unserved <= tr.load + 1e-9)
    assert np.all(tr.renewable_curtailed >= -1e-12)
    if e > 0:
        assert np.all((tr.soc >= -1e-12) & (tr.soc <= 1 + 1e-12))
        assert np.all(tr.storage_discharge <= p + 1e-9) and np.all(tr.storage_charge <= p + 1e-9)
