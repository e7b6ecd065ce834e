import json
from pathlib import Path

import numpy as np
import pytest

from relgrid.scenario_engine import synthetic_history, write_history_csv
from relgrid.system_model import (
    Component,
    ComponentKind,
    GeneratorUnit,
    LoadPoint,
    Priority,
    StorageUnit,
    SystemModel,
    model_to_dict,
    three_bus_example,
)

HOURS = 8760.0


def line(cid, lam, repair_h=10.0):
    return Component(cid, ComponentKind.LINE, lam, HOURS / repair_h)


def radial_model(rates, repairs_h, peak=10.0, customers=100):
    comps = tuple(line(f"C{i}", lam, r) for i, (lam, r) in enumerate(zip(rates, repairs_h)))
    lp = LoadPoint("LP", customers, peak, (frozenset(c.id for c in comps),))
    return SystemModel(comps, (lp,))


def bus_model(pv_kw=0.0, dg_kw=0.0, storage=None, grid=False, import_limit=np.inf, peak=10.0,
              priorities=(Priority.NON_CRITICAL,), export_limit=0.0):
    """Single-bus model: one ideal feeder per load point, no failures."""
    comps = [Component("F", ComponentKind.LINE, 0.0, 1.0), Component("GT", ComponentKind.GRID_TIE, 0.0, 1.0),
             Component("INV", ComponentKind.INVERTER, 0.0, 1.0), Component("DGC", ComponentKind.DISPATCHABLE, 0.0, 1.0),
             Component("BC", ComponentKind.STORAGE, 0.0, 1.0)]
    lps = tuple(LoadPoint(f"LP{i}", 10, peak, (frozenset({"F"}),), priority=p) for i, p in enumerate(priorities))
    gens = []
    if pv_kw:
        gens.append(GeneratorUnit("PV", "pv", pv_kw, "INV"))
    if dg_kw:
        gens.append(GeneratorUnit("DG", "dispatchable", dg_kw, "DGC", marginal_cost=0.3))
    stor = ()
    if storage is not None:
        e, p = storage
        stor = (StorageUnit("B", e, p, 1.0, 1.0, 0.0, 1.0, 1.0, "BC"),)
    return SystemModel(tuple(comps), lps, tuple(gens), stor, grid_connected=grid, grid_import_limit=import_limit,
                       grid_export_limit=export_limit, grid_tie="GT" if grid else None)


def random_fixture(rng, iterations=None, horizon_h=HOURS):
    """Small random model plus synthetic outage logs for index identities."""
    from relgrid.mcs import Interruption, OutageLog

    n_lp = int(rng.integers(1, 6))
    lps = tuple(LoadPoint(f"L{j}", int(rng.integers(1, 500)), 10.0, (frozenset({"F"}),)) for j in range(n_lp))
    model = SystemModel((Component("F", ComponentKind.LINE, 1.0, 100.0),), lps)
    logs = []
    for n in range(iterations or int(rng.integers(1, 20))):
        ints = []
        for j in range(n_lp):
            for _ in range(int(rng.poisson(1.5))):
                start = float(rng.uniform(0, horizon_h - 50))
                dur = float(rng.choice([rng.uniform(0.0, 0.08), rng.exponential(4.0)]))
                ints.append(Interruption(f"L{j}", start, start + dur, dur * 10.0, "F"))
        logs.append(OutageLog(n, "s", horizon_h, (), tuple(ints)))
    return model, logs


@pytest.fixture
def three_bus():
    return three_bus_example()


@pytest.fixture
def cli_files(tmp_path):
    """System JSON, two history CSVs and a feasible plan document."""
    sysp = tmp_path / "system.json"
    sysp.write_text(json.dumps(model_to_dict(three_bus_example())))
    h1, h2 = tmp_path / "hist1.csv", tmp_path / "hist2.csv"
    write_history_csv(h1, synthetic_history(14, 1, lulls=[(24 * 5, 48)]).to_scenario("a"))
    write_history_csv(h2, synthetic_history(14, 2).to_scenario("b"))
    plan = {
        "system": "system.json",
        "scenarios": {"paths": ["hist1.csv", "hist2.csv"], "weights": [1, 1]},
        "candidate_grid": {"pv_kw": [0, 100], "dispatchable_kw": [0, 80, 200], "storage_kwh": [0, 200],
                           "storage_kw": [50], "grid_connected": [False]},
        "targets": {"lole_max": 2.4},
        "cost_model": {"capex": {"pv": 1000, "dispatchable": 600, "storage_energy": 300}, "voll": 10,
                       "horizon_years": 10},
        "mcs": None,
        "verify_mcs": None,
    }
    (tmp_path / "plan.json").write_text(json.dumps(plan))
    infeasible = dict(plan, candidate_grid={"pv_kw": [0, 50], "dispatchable_kw": [0]})
    (tmp_path / "plan_bad.json").write_text(json.dumps(infeasible))
    return tmp_path


# ---------------------------------------------------------------- acceptance report

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion covered by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", (m.args[0], m.args[1])))


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    n, text = crit
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        prev = _criteria.get(n, (text, "PASS"))[1]
        status = "PASS" if report.outcome == "passed" and prev == "PASS" else "FAIL"
        _criteria[n] = (text, status)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        text, status = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {text}")


def result_payload(path):
    """JSON payload with the run-specific manifest.runtime block removed."""
    doc = json.loads(Path(path).read_text())
    doc["manifest"].pop("runtime")
    return json.dumps(doc, sort_keys=True)
