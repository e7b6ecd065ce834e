"""Chronological single-bus energy balance of a microgrid.

Every step serves load in merit order (renewables first, then the policy's
order of storage discharge, dispatchable units and grid import), charges
storage from surplus renewables, exports or curtails the rest and sheds the
remaining deficit tier by tier. Load points cut off from the bus by network
outages are recorded as unsupplied and never reach the balance.

The per-step balance identity holds to rounding on every step::

    renewable_used + dispatchable + discharge + grid_import + shed + unsupplied
        == load + charge + grid_export
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .scenario_engine import Scenario, combined_cf
from .system_model import (
    TIER_INDEX,
    TIERS,
    ModelError,
    Priority,
    StorageUnit,
    SystemModel,
)

SHED_TOL = 1e-9
MERIT_CLASSES = ("renewable", "storage", "dispatchable", "grid")


@dataclass(frozen=True)
class DispatchPolicy:
    merit_order: tuple[str, ...] = MERIT_CLASSES
    reserve_soc_target: float | None = None
    reserve_lookahead_hours: float = 0.0
    scarcity_threshold: float = 0.15
    shedding_order: tuple[Priority, ...] = (Priority.NON_CRITICAL, Priority.ESSENTIAL, Priority.CRITICAL)
    grid_charging: bool = False

    def check(self, model: SystemModel | None = None) -> None:
        if sorted(self.merit_order) != sorted(MERIT_CLASSES) or self.merit_order[0] != "renewable":
            raise ModelError(f"merit_order must start with 'renewable' and list each of {MERIT_CLASSES} once")
        if sorted(self.shedding_order, key=lambda p: p.value) != sorted(TIERS, key=lambda p: p.value):
            raise ModelError("shedding_order must cover every priority tier exactly once")
        if self.reserve_soc_target is not None and model is not None:
            for s in model.storage_units:
                if not (s.soc_min <= self.reserve_soc_target <= s.soc_max):
                    raise ModelError(f"reserve_soc_target outside SoC band of storage {s.id!r}")

    @classmethod
    def from_dict(cls, d: Mapping) -> "DispatchPolicy":
        kw = dict(d)
        if "merit_order" in kw:
            kw["merit_order"] = tuple(kw["merit_order"])
        if "shedding_order" in kw:
            kw["shedding_order"] = tuple(Priority(p) for p in kw["shedding_order"])
        return cls(**kw)


def apply_reserve_target(policy: DispatchPolicy, upcoming_cf, soc_min: float) -> float:
    """Discharge floor for non-critical service given the lookahead window.

    When the mean combined capacity factor of the window falls below the
    scarcity threshold, the floor rises to the reserve SoC target.
    """
    if policy.reserve_soc_target is None:
        return soc_min
    window = np.asarray(upcoming_cf, dtype=float)
    if window.size == 0:
        return soc_min
    if window.mean() < policy.scarcity_threshold:
        return max(soc_min, policy.reserve_soc_target)
    return soc_min


@dataclass(frozen=True)
class DispatchStep:
    t: int
    load: float
    served_load: float
    shed_by_tier: dict
    unsupplied: float
    renewable_used: float
    renewable_curtailed: float
    dispatchable_output: float
    storage_charge: float
    storage_discharge: float
    soc: tuple[float, ...]
    grid_import: float
    grid_export: float
    mode: str

    @property
    def shed_total(self) -> float:
        return sum(self.shed_by_tier.values()) + self.unsupplied


@dataclass
class DispatchTrace:
    scenario_id: str
    step_hours: float
    lp_ids: tuple[str, ...]
    storage_ids: tuple[str, ...]
    load_by_tier: np.ndarray  # (T, 3), every load point
    shed_by_tier: np.ndarray  # (T, 3), adequacy shedding on connected load
    unsupplied_by_tier: np.ndarray  # (T, 3), load cut off by network outages
    unserved_by_lp: np.ndarray  # (T, n_lp), shed + unsupplied
    renewable_available: np.ndarray
    renewable_used: np.ndarray
    renewable_curtailed: np.ndarray
    dispatchable_output: np.ndarray
    dispatchable_cost: np.ndarray
    storage_charge: np.ndarray
    storage_discharge: np.ndarray
    soc: np.ndarray  # (T, n_storage), end of step
    grid_import: np.ndarray
    grid_export: np.ndarray
    islanded: np.ndarray
    reserve_active: np.ndarray
    availability_applied: bool = False
    transitions: list = field(default_factory=list)  # (step, "islanding"|"reconnection", "planned"|"unplanned")

    @property
    def horizon_steps(self) -> int:
        return self.load.size

    @property
    def load(self) -> np.ndarray:
        return self.load_by_tier.sum(axis=1)

    @property
    def unserved(self) -> np.ndarray:
        """P_shed(t): adequacy shedding plus network-unsupplied load, kW."""
        return self.shed_by_tier.sum(axis=1) + self.unsupplied_by_tier.sum(axis=1)

    @property
    def served_load(self) -> np.ndarray:
        return self.load - self.unserved

    def balance_residual(self) -> np.ndarray:
        supply = (self.renewable_used + self.dispatchable_output + self.storage_discharge
                  + self.grid_import + self.unserved)
        demand = self.load + self.storage_charge + self.grid_export
        return supply - demand

    def step(self, t: int) -> DispatchStep:
        return DispatchStep(
            t=t,
            load=float(self.load_by_tier[t].sum()),
            served_load=float(self.served_load[t]),
            shed_by_tier={p.value: float(self.shed_by_tier[t, i]) for i, p in enumerate(TIERS)},
            unsupplied=float(self.unsupplied_by_tier[t].sum()),
            renewable_used=float(self.renewable_used[t]),
            renewable_curtailed=float(self.renewable_curtailed[t]),
            dispatchable_output=float(self.dispatchable_output[t]),
            storage_charge=float(self.storage_charge[t]),
            storage_discharge=float(self.storage_discharge[t]),
            soc=tuple(float(x) for x in self.soc[t]),
            grid_import=float(self.grid_import[t]),
            grid_export=float(self.grid_export[t]),
            mode="islanded" if self.islanded[t] else "grid-connected",
        )

    def to_csv(self, path: str | Path) -> None:
        cols = trace_columns(self.storage_ids)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            served, unserved = self.served_load, self.unserved
            for t in range(self.horizon_steps):
                w.writerow(
                    [t, _f(self.load_by_tier[t].sum()), _f(served[t]), _f(unserved[t])]
                    + [_f(x) for x in self.shed_by_tier[t]]
                    + [_f(self.unsupplied_by_tier[t].sum()), _f(self.renewable_available[t]),
                       _f(self.renewable_used[t]), _f(self.renewable_curtailed[t]),
                       _f(self.dispatchable_output[t]), _f(self.storage_charge[t]), _f(self.storage_discharge[t])]
                    + [_f(x) for x in self.soc[t]]
                    + [_f(self.grid_import[t]), _f(self.grid_export[t]),
                       "islanded" if self.islanded[t] else "grid-connected", int(self.reserve_active[t])]
                )


def trace_columns(storage_ids: Sequence[str]) -> list[str]:
    return (["t", "load_kw", "served_kw", "unserved_kw", "shed_critical_kw", "shed_essential_kw", "shed_non_critical_kw",
             "unsupplied_kw", "renewable_available_kw", "renewable_used_kw", "renewable_curtailed_kw",
             "dispatchable_kw", "storage_charge_kw", "storage_discharge_kw"]
            + [f"soc_{sid}" for sid in storage_ids]
            + ["grid_import_kw", "grid_export_kw", "mode", "reserve_active"])


def _f(x: float) -> str:
    return repr(float(x))


def lp_load_matrix(model: SystemModel, scenario: Scenario) -> np.ndarray:
    """(T, n_lp) load in kW: hourly weight x monthly weight x peak x scenario multiplier."""
    hour, month = scenario.hour_month()
    mult = scenario.load_series.values
    cols = []
    for lp in model.load_points:
        wh = np.asarray(lp.hourly_weights)[hour]
        wm = np.asarray(lp.monthly_weights)[month]
        cols.append(wh * wm * lp.peak_load * mult)
    return np.column_stack(cols) if cols else np.zeros((scenario.horizon_steps, 0))


def lp_tiers(model: SystemModel) -> np.ndarray:
    return np.array([TIER_INDEX[lp.priority] for lp in model.load_points], dtype=int)


def tier_sum(lp_matrix: np.ndarray, tiers: np.ndarray) -> np.ndarray:
    out = np.zeros((lp_matrix.shape[0], 3))
    for k in range(3):
        sel = tiers == k
        if sel.any():
            out[:, k] = lp_matrix[:, sel].sum(axis=1)
    return out


class Engine:
    """Per-step dispatch kernel shared by :func:`run` and the outage simulator."""

    def __init__(self, model: SystemModel, policy: DispatchPolicy):
        policy.check(model)
        self.model = model
        self.policy = policy
        self.pv = [(g.rated_capacity, g.component_ref) for g in model.generators if g.kind == "pv"]
        self.wind = [(g.rated_capacity, g.component_ref) for g in model.generators if g.kind == "wind"]
        self.disp = sorted(
            ((g.marginal_cost or 0.0, g.id, g.rated_capacity, g.component_ref)
             for g in model.generators if g.kind == "dispatchable"),
        )
        self.storage: tuple[StorageUnit, ...] = model.storage_units
        self.grid_connected = model.grid_connected
        self.grid_tie = model.grid_tie
        self.import_limit = model.grid_import_limit
        self.export_limit = model.grid_export_limit
        self.shed_order = tuple(TIER_INDEX[p] for p in policy.shedding_order)
        self.merit = tuple(m for m in policy.merit_order if m != "renewable")
        self.crit = TIER_INDEX[Priority.CRITICAL]
        self.pv_kw = sum(r for r, _ in self.pv)
        self.wind_kw = sum(r for r, _ in self.wind)

    def initial_soc(self) -> list[float]:
        return [s.initial_soc for s in self.storage]

    def grid_available(self, down) -> bool:
        return self.grid_connected and (self.grid_tie is None or self.grid_tie not in down)

    def step(self, tier_load, pv_cf: float, wind_cf: float, down, soc: list[float], dt: float,
             reserve_active: bool = False):
        """Advance one step of length ``dt`` hours; ``soc`` is updated in place.

        Returns (ren_avail, ren_used, curtailed, dispatchable, fuel_cost,
        charge, discharge, grid_import, grid_export, shed[3], islanded).
        """
        ren = 0.0
        for rated, comp in self.pv:
            if comp not in down:
                ren += rated * pv_cf
        for rated, comp in self.wind:
            if comp not in down:
                ren += rated * wind_cf
        load = tier_load[0] + tier_load[1] + tier_load[2]
        ren_to_load = min(ren, load)
        deficit = load - ren_to_load
        grid_ok = self.grid_available(down)
        discharge = dispatch = imp = fuel = 0.0
        n_st = len(self.storage)
        dis_unit = [0.0] * n_st
        target = self.policy.reserve_soc_target

        for src in self.merit:
            if deficit <= 0.0:
                break
            if src == "storage":
                for k, s in enumerate(self.storage):
                    if deficit <= 0.0:
                        break
                    if s.component_ref in down or s.energy_capacity <= 0:
                        continue
                    floor = max(s.soc_min, target) if reserve_active else s.soc_min
                    e_avail = max(0.0, soc[k] - floor) * s.energy_capacity * s.discharge_efficiency
                    p = min(deficit, s.power_rating, e_avail / dt)
                    if p > 0.0:
                        soc[k] = max(s.soc_min, soc[k] - p * dt / (s.discharge_efficiency * s.energy_capacity))
                        dis_unit[k] += p
                        discharge += p
                        deficit -= p
            elif src == "dispatchable":
                for cost, _, rated, comp in self.disp:
                    if deficit <= 0.0:
                        break
                    if comp in down:
                        continue
                    p = min(deficit, rated)
                    dispatch += p
                    fuel += p * dt * cost
                    deficit -= p
            elif src == "grid" and grid_ok:
                p = min(deficit, self.import_limit)
                imp += p
                deficit -= p

        shed = [0.0, 0.0, 0.0]
        if deficit > 0.0:
            for k in self.shed_order:
                x = min(tier_load[k], deficit)
                shed[k] = x
                deficit -= x
                if deficit <= 0.0:
                    break

        # reserve band below the raised floor is kept for critical load only
        if reserve_active and shed[self.crit] > 0.0:
            for k, s in enumerate(self.storage):
                need = shed[self.crit]
                if need <= 0.0:
                    break
                if s.component_ref in down or s.energy_capacity <= 0:
                    continue
                e_avail = max(0.0, soc[k] - s.soc_min) * s.energy_capacity * s.discharge_efficiency
                p = min(need, s.power_rating - dis_unit[k], e_avail / dt)
                if p > 0.0:
                    soc[k] = max(s.soc_min, soc[k] - p * dt / (s.discharge_efficiency * s.energy_capacity))
                    dis_unit[k] += p
                    discharge += p
                    shed[self.crit] = need - p

        surplus = ren - ren_to_load
        charge = 0.0
        if surplus > 0.0:
            for k, s in enumerate(self.storage):
                if surplus <= 0.0:
                    break
                if s.component_ref in down or s.energy_capacity <= 0:
                    continue
                room = max(0.0, s.soc_max - soc[k]) * s.energy_capacity / s.charge_efficiency
                p = min(surplus, s.power_rating, room / dt)
                if p > 0.0:
                    soc[k] = min(s.soc_max, soc[k] + p * dt * s.charge_efficiency / s.energy_capacity)
                    charge += p
                    surplus -= p
        if grid_ok and self.policy.grid_charging:
            headroom = self.import_limit - imp
            for k, s in enumerate(self.storage):
                if headroom <= 0.0:
                    break
                if s.component_ref in down or s.energy_capacity <= 0 or dis_unit[k] > 0.0:
                    continue
                room = max(0.0, s.soc_max - soc[k]) * s.energy_capacity / s.charge_efficiency
                p = min(headroom, s.power_rating, room / dt)
                if p > 0.0:
                    soc[k] = min(s.soc_max, soc[k] + p * dt * s.charge_efficiency / s.energy_capacity)
                    charge += p
                    imp += p
                    headroom -= p
        export = min(surplus, self.export_limit) if grid_ok and surplus > 0.0 else 0.0
        curtailed = surplus - export
        return (ren, ren - curtailed, curtailed, dispatch, fuel, charge, discharge, imp, export, shed,
                not grid_ok)

    def reserve_flags(self, scenario: Scenario) -> np.ndarray:
        """Per-step reserve rule, evaluated on the upcoming combined-cf window."""
        T = scenario.horizon_steps
        p = self.policy
        ccf = combined_cf(scenario.pv_cf_series, scenario.wind_cf_series, self.pv_kw, self.wind_kw)
        if p.reserve_soc_target is None or p.reserve_lookahead_hours <= 0 or ccf is None:
            return np.zeros(T, dtype=bool)
        k = max(1, int(math.ceil(p.reserve_lookahead_hours / scenario.step_hours - 1e-12)))
        csum = np.concatenate(([0.0], np.cumsum(ccf)))
        idx = np.arange(T)
        stop = np.minimum(idx + k, T)
        mean = (csum[stop] - csum[idx]) / (stop - idx)
        return mean < p.scarcity_threshold


def _availability_matrix(model: SystemModel, availability, T: int) -> tuple[list[str], np.ndarray | None]:
    if not availability:
        return [], None
    ids = sorted(availability)
    for cid in ids:
        model.component(cid)
    mat = np.ones((len(ids), T), dtype=bool)
    for i, cid in enumerate(ids):
        a = np.asarray(availability[cid], dtype=bool)
        if a.shape != (T,):
            raise ModelError(f"availability series for {cid!r} has length {a.size}, expected {T}")
        mat[i] = a
    return ids, mat


def disconnected_matrix(model: SystemModel, ids: list[str], avail: np.ndarray) -> np.ndarray:
    """(T, n_lp) True where every supply path of a load point has a down component."""
    pos = {c: i for i, c in enumerate(ids)}
    T = avail.shape[1]
    out = np.zeros((T, len(model.load_points)), dtype=bool)
    for j, lp in enumerate(model.load_points):
        cut = np.ones(T, dtype=bool)
        for path in lp.supply_paths:
            rows = [pos[c] for c in path if c in pos]
            path_down = (~avail[rows]).any(axis=0) if rows else np.zeros(T, dtype=bool)
            cut &= path_down
        out[:, j] = cut
    return out


def run(model: SystemModel, scenario: Scenario, policy: DispatchPolicy | None = None,
        availability: Mapping[str, Sequence[bool]] | None = None) -> DispatchTrace:
    """Chronological dispatch of ``scenario``.

    ``availability`` maps component ids to per-step booleans; components not
    listed are always available.
    """
    policy = policy or DispatchPolicy()
    eng = Engine(model, policy)
    T, dt = scenario.horizon_steps, scenario.step_hours
    lp_load = lp_load_matrix(model, scenario)
    tiers = lp_tiers(model)
    ids, avail = _availability_matrix(model, availability, T)
    if avail is None:
        disc = np.zeros_like(lp_load, dtype=bool)
        down_at = None
    else:
        disc = disconnected_matrix(model, ids, avail)
        down_at = ~avail
    connected = np.where(disc, 0.0, lp_load)
    conn_tier = tier_sum(connected, tiers)
    load_tier = tier_sum(lp_load, tiers)
    reserve = eng.reserve_flags(scenario)
    pv = scenario.pv_cf_series.values
    wind = scenario.wind_cf_series.values

    n_s = len(model.storage_units)
    out = {name: np.zeros(T) for name in ("ra", "ru", "rc", "dg", "fc", "ch", "dis", "imp", "exp")}
    shed = np.zeros((T, 3))
    soc_hist = np.zeros((T, n_s))
    isl = np.zeros(T, dtype=bool)
    soc = eng.initial_soc()
    empty: frozenset[str] = frozenset()
    for t in range(T):
        if down_at is not None and down_at[:, t].any():
            down = {ids[i] for i in np.flatnonzero(down_at[:, t])}
        else:
            down = empty
        r = eng.step(conn_tier[t], pv[t], wind[t], down, soc, dt, bool(reserve[t]))
        (out["ra"][t], out["ru"][t], out["rc"][t], out["dg"][t], out["fc"][t], out["ch"][t],
         out["dis"][t], out["imp"][t], out["exp"][t]) = r[:9]
        shed[t] = r[9]
        isl[t] = r[10]
        soc_hist[t] = soc

    unsupplied = load_tier - conn_tier
    # spread tier shedding over connected load points in proportion to load
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(conn_tier > 0, shed / conn_tier, 0.0)
    unserved_lp = np.where(disc, lp_load, connected * frac[:, tiers])
    transitions = []
    for t in range(1, T):
        if isl[t] != isl[t - 1]:
            transitions.append((t, "islanding" if isl[t] else "reconnection", "unplanned"))
    return DispatchTrace(
        scenario_id=scenario.id,
        step_hours=dt,
        lp_ids=tuple(lp.id for lp in model.load_points),
        storage_ids=tuple(s.id for s in model.storage_units),
        load_by_tier=load_tier,
        shed_by_tier=shed,
        unsupplied_by_tier=unsupplied,
        unserved_by_lp=unserved_lp,
        renewable_available=out["ra"],
        renewable_used=out["ru"],
        renewable_curtailed=out["rc"],
        dispatchable_output=out["dg"],
        dispatchable_cost=out["fc"],
        storage_charge=out["ch"],
        storage_discharge=out["dis"],
        soc=soc_hist,
        grid_import=out["imp"],
        grid_export=out["exp"],
        islanded=isl,
        reserve_active=reserve,
        availability_applied=avail is not None,
        transitions=transitions,
    )


@dataclass(frozen=True)
class TraceSummary:
    """What adequacy indices need from a trace, as read back from CSV."""

    scenario_id: str
    step_hours: float
    load: np.ndarray
    unserved: np.ndarray


def read_trace_csv(path: str | Path, scenario_id: str | None = None, step_hours: float = 1.0) -> TraceSummary:
    from .scenario_engine import InputFormatError

    path = str(path)
    load, unserved = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ("load_kw", "unserved_kw"):
            if col not in header:
                raise InputFormatError(f"missing column {col!r}", path, 1, col)
        for row in reader:
            for col in ("load_kw", "unserved_kw"):
                try:
                    val = float(row[col])
                except (TypeError, ValueError):
                    raise InputFormatError(f"non-numeric value in {col!r}", path, reader.line_num, col) from None
                (load if col == "load_kw" else unserved).append(val)
    return TraceSummary(scenario_id or Path(path).stem, step_hours, np.array(load), np.array(unserved))
