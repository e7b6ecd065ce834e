"""Reliability-constrained sizing of microgrid resources.

The search walks an explicit candidate grid. Each candidate is instantiated
from a template model, dispatched over every scenario (plus an optional
sequential MCS for component outages), costed over its lifecycle and
checked against reliability targets. The cheapest candidate meeting every
target and passing the protection rules is chosen. A higher-fidelity
verification run may then tighten the targets and restart the search, and a
candidate failing the protection rules is excluded before selection
resumes. Every such event lands in the stage log.

Stages, as recorded in the log:

1. targets, cost and VOLL inputs
2. scenario set
3. constraint set (exclusions, storage bound)
4. candidate grid
5. screening search and refinement
6. protection feasibility
7. verification with the high-fidelity MCS
8. cost-reliability frontier and summary
9. refinement log
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .dispatch import DispatchPolicy, run as run_dispatch
from .indices import AdequacyIndices, CustomerIndices, adequacy_probabilistic, customer_indices
from .mcs import McsConfig, McsEstimate, run_sequential
from .scenario_engine import ScarcityEvent, ScenarioSet, scarcity_percentile
from .system_model import HOURS_PER_YEAR, TIERS, Priority, SystemModel

AXES = ("pv_kw", "wind_kw", "dispatchable_kw", "storage_kwh", "storage_kw", "grid_connected")
TECHS = ("pv", "wind", "dispatchable", "storage_energy", "storage_power")
MAX_OUTER_LOOPS = 5


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class DesignCandidate:
    pv_kw: float = 0.0
    wind_kw: float = 0.0
    dispatchable_kw: float = 0.0
    storage_kwh: float = 0.0
    storage_kw: float = 0.0
    grid_connected: bool = False

    def __post_init__(self):
        for name in AXES[:-1]:
            if not getattr(self, name) >= 0:
                raise PlanError(f"{name} must be >= 0")

    @property
    def key(self) -> tuple:
        return tuple(getattr(self, a) for a in AXES)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ReliabilityTargets:
    lole_max: float = math.inf  # hours / year
    eens_max: float = math.inf  # kWh / year
    tier_shed_max: Mapping[Priority, float] = field(default_factory=dict)  # kWh / year

    def __post_init__(self):
        if self.lole_max < 0 or self.eens_max < 0 or any(v < 0 for v in self.tier_shed_max.values()):
            raise PlanError("reliability targets must be >= 0")

    def to_dict(self) -> dict:
        return {"lole_max": _num(self.lole_max), "eens_max": _num(self.eens_max),
                "tier_shed_max": {Priority(k).value: v for k, v in self.tier_shed_max.items()}}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ReliabilityTargets":
        return cls(float(d.get("lole_max", math.inf)), float(d.get("eens_max", math.inf)),
                   {Priority(k): float(v) for k, v in d.get("tier_shed_max", {}).items()})


@dataclass(frozen=True)
class CostModel:
    capex: Mapping[str, float] = field(default_factory=dict)  # per kW or kWh
    fixed_opex: Mapping[str, float] = field(default_factory=dict)  # per kW or kWh per year
    variable_opex: float = 0.0  # per kWh of dispatchable output
    fuel_cost: float | None = None  # per kWh; None uses the generators' marginal costs
    grid_price: float = 0.0  # per kWh imported
    export_price: float = 0.0  # per kWh exported
    discount_rate: float = 0.05
    horizon_years: int = 20
    voll: float = 0.0  # per kWh unserved
    budget_max: float = math.inf  # capital budget

    def __post_init__(self):
        if not 0 <= self.discount_rate < 1:
            raise PlanError("discount_rate must lie in [0, 1)")
        if self.horizon_years < 1:
            raise PlanError("horizon_years must be >= 1")
        for table in (self.capex, self.fixed_opex):
            unknown = set(table) - set(TECHS)
            if unknown:
                raise PlanError(f"unknown technology keys {sorted(unknown)}; expected {TECHS}")
        if self.voll < 0:
            raise PlanError("VOLL must be >= 0")

    @classmethod
    def from_dict(cls, d: Mapping) -> "CostModel":
        kw = dict(d)
        if "budget_max" in kw and kw["budget_max"] is None:
            kw["budget_max"] = math.inf
        return cls(**kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["budget_max"] = _num(self.budget_max)
        return d

    def discount_factors(self) -> np.ndarray:
        return discount_factors(self.discount_rate, self.horizon_years)

    def capital_cost(self, design: DesignCandidate) -> float:
        return sum(self.capex.get(t, 0.0) * q for t, q in _quantities(design).items())

    def fixed_annual(self, design: DesignCandidate) -> float:
        return sum(self.fixed_opex.get(t, 0.0) * q for t, q in _quantities(design).items())


def _quantities(design: DesignCandidate) -> dict[str, float]:
    return {"pv": design.pv_kw, "wind": design.wind_kw, "dispatchable": design.dispatchable_kw,
            "storage_energy": design.storage_kwh, "storage_power": design.storage_kw}


def _num(x: float):
    return None if math.isinf(x) else x


# --------------------------------------------------------------- economics


def discount_factors(rate: float, years: int) -> np.ndarray:
    """End-of-year factors (1 + r)^-y for y = 1..years."""
    return (1.0 + rate) ** -np.arange(1, years + 1, dtype=float)


def npc(annual_cost, discount_rate: float, years: int, capex: float = 0.0) -> float:
    """Net present cost: capex plus discounted annual costs (scalar or per-year sequence)."""
    f = discount_factors(discount_rate, years)
    return float(capex + np.sum(np.broadcast_to(np.asarray(annual_cost, float), f.shape) * f))


def lcoe(annual_cost, annual_energy, discount_rate: float, years: int, capex: float = 0.0) -> float:
    """Discounted lifecycle cost over discounted delivered energy."""
    f = discount_factors(discount_rate, years)
    energy = float(np.sum(np.broadcast_to(np.asarray(annual_energy, float), f.shape) * f))
    if energy <= 0:
        raise PlanError("delivered energy must be positive")
    return npc(annual_cost, discount_rate, years, capex) / energy


# ------------------------------------------------------------ instantiation


def instantiate(design: DesignCandidate, template: SystemModel) -> SystemModel:
    """Template model resized to the design.

    Units of one technology are scaled together, keeping their shares of the
    template's capacity; a zero size removes them.
    """
    gens = []
    for kind, size in (("pv", design.pv_kw), ("wind", design.wind_kw), ("dispatchable", design.dispatchable_kw)):
        protos = [g for g in template.generators if g.kind == kind]
        if size > 0 and not protos:
            raise PlanError(f"template has no {kind} unit to scale")
        if size > 0:
            base = sum(g.rated_capacity for g in protos)
            gens += [replace(g, rated_capacity=size * g.rated_capacity / base) for g in protos]
    stor = []
    if design.storage_kwh > 0 and design.storage_kw > 0:
        if not template.storage_units:
            raise PlanError("template has no storage unit to scale")
        e0 = sum(s.energy_capacity for s in template.storage_units)
        p0 = sum(s.power_rating for s in template.storage_units)
        stor = [replace(s, energy_capacity=design.storage_kwh * s.energy_capacity / e0,
                        power_rating=design.storage_kw * s.power_rating / p0) for s in template.storage_units]
    order = {g.id: i for i, g in enumerate(template.generators)}
    gens.sort(key=lambda g: order[g.id])
    return replace(template, generators=tuple(gens), storage_units=tuple(stor),
                   grid_connected=design.grid_connected,
                   grid_tie=template.grid_tie if design.grid_connected else None)


# -------------------------------------------------------------- protection


@dataclass(frozen=True)
class ProtectionRules:
    fault_current_multiple: float = 1.2
    min_fault_ratio: float = 0.0
    require_grid_tie: bool = True

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProtectionRules":
        return cls(**dict(d))


@dataclass(frozen=True)
class ProtectionCheck:
    passed: bool
    reasons: tuple[str, ...]
    fault_ratio: float


def protection_feasibility(design: DesignCandidate, model: SystemModel,
                           rules: ProtectionRules = ProtectionRules(), peak_kw: float | None = None) -> ProtectionCheck:
    """Rule checks: islanded fault-current ratio and the grid-tie requirement.

    Inverter capacity is PV plus wind plus storage power. ``peak_kw``
    defaults to the sum of load-point peaks.
    """
    peak = sum(lp.peak_load for lp in model.load_points) if peak_kw is None else peak_kw
    inverter_kw = design.pv_kw + design.wind_kw + design.storage_kw
    ratio = inverter_kw * rules.fault_current_multiple / peak if peak > 0 else math.inf
    reasons = []
    if rules.min_fault_ratio > 0 and ratio < rules.min_fault_ratio:
        reasons.append("fault-current ratio")
    if rules.require_grid_tie and design.grid_connected and model.grid_tie is None:
        reasons.append("grid tie missing")
    return ProtectionCheck(not reasons, tuple(reasons), ratio)


# -------------------------------------------------------------- evaluation


@dataclass
class Evaluation:
    design: DesignCandidate
    lifecycle_cost: float
    capital_cost: float
    annual: dict  # per-year cost components
    adequacy: AdequacyIndices
    eens: float  # kWh / year, adequacy plus component outages
    lole: float  # hours / year, adequacy plus component outages
    tier_shed: dict  # kWh / year of adequacy shedding by tier
    delivered_energy: float  # kWh / year
    customer: CustomerIndices | None = None
    mcs: McsEstimate | None = None
    discounted_years: float = 1.0  # sum of discount factors over the horizon

    @property
    def lcoe(self) -> float | None:
        if self.delivered_energy <= 0:
            return None
        return self.lifecycle_cost / (self.delivered_energy * self.discounted_years)

    def to_dict(self) -> dict:
        return {
            "design": self.design.to_dict(),
            "lifecycle_cost": self.lifecycle_cost,
            "capital_cost": self.capital_cost,
            "annual_costs": self.annual,
            "eens_kwh_per_yr": self.eens,
            "lole_h_per_yr": self.lole,
            "lpsp": self.adequacy.lpsp,
            "lolp": self.adequacy.lolp,
            "tier_shed_kwh_per_yr": self.tier_shed,
            "delivered_kwh_per_yr": self.delivered_energy,
            "lcoe": self.lcoe,
            "customer": None if self.customer is None else self.customer.to_dict(),
        }


def evaluate(design: DesignCandidate, template: SystemModel, scenario_set: ScenarioSet,
             policy: DispatchPolicy | None, cost_model: CostModel, mcs_config: McsConfig | None = None) -> Evaluation:
    """Dispatch every scenario (and optionally run MCS), then cost and index the design."""
    policy = policy or DispatchPolicy()
    model = instantiate(design, template)
    traces = {s.id: run_dispatch(model, s, policy) for s in scenario_set}
    adequacy = adequacy_probabilistic(traces, scenario_set)
    scale = HOURS_PER_YEAR / adequacy.horizon_hours
    dt = scenario_set.step_hours

    def expected(f) -> float:
        return float(scale * dt * sum(p * float(np.sum(f(traces[s.id])))
                                      for p, s in zip(scenario_set.probabilities.tolist(), scenario_set)))

    dg_energy = expected(lambda t: t.dispatchable_output)
    fuel = expected(lambda t: t.dispatchable_cost) if cost_model.fuel_cost is None else dg_energy * cost_model.fuel_cost
    imports = expected(lambda t: t.grid_import)
    exports = expected(lambda t: t.grid_export)
    tier_shed = {tier.value: expected(lambda t, j=j: t.shed_by_tier[:, j]) for j, tier in enumerate(TIERS)}
    delivered = expected(lambda t: t.served_load)

    est = customer = None
    eens = adequacy.eens_per_year
    lole = adequacy.lole_per_year
    if mcs_config is not None:
        logs, est = run_sequential(model, scenario_set, policy, mcs_config)
        customer = customer_indices(logs, model, mcs_config.momentary_threshold_h)
        eens += est.eens
        lole += est.lol_hours
        delivered -= est.eens
    annual = {
        "fixed_opex": cost_model.fixed_annual(design),
        "variable_opex": dg_energy * cost_model.variable_opex,
        "fuel": fuel,
        "grid_import": imports * cost_model.grid_price,
        "grid_export_revenue": -exports * cost_model.export_price,
        "unserved_energy": eens * cost_model.voll,
    }
    capital = cost_model.capital_cost(design)
    life = npc(sum(annual.values()), cost_model.discount_rate, cost_model.horizon_years, capital)
    return Evaluation(design, life, capital, annual, adequacy, eens, lole, tier_shed, max(delivered, 0.0), customer,
                      est, float(cost_model.discount_factors().sum()))


def violations(ev: Evaluation, targets: ReliabilityTargets) -> dict[str, tuple[float, float]]:
    """Metric name -> (observed, limit) for every violated target."""
    out = {}
    if ev.lole > targets.lole_max:
        out["LOLE"] = (ev.lole, targets.lole_max)
    if ev.eens > targets.eens_max:
        out["EENS"] = (ev.eens, targets.eens_max)
    for tier, limit in targets.tier_shed_max.items():
        val = ev.tier_shed[Priority(tier).value]
        if val > limit:
            out[f"shed:{Priority(tier).value}"] = (val, limit)
    return out


# ------------------------------------------------------------------ search


@dataclass(frozen=True)
class CandidateGrid:
    pv_kw: tuple[float, ...] = (0.0,)
    wind_kw: tuple[float, ...] = (0.0,)
    dispatchable_kw: tuple[float, ...] = (0.0,)
    storage_kwh: tuple[float, ...] = (0.0,)
    storage_kw: tuple[float, ...] = (0.0,)
    grid_connected: tuple[bool, ...] = (False,)

    def __post_init__(self):
        for a in AXES:
            vals = getattr(self, a)
            if len(vals) == 0:
                raise PlanError(f"candidate grid axis {a!r} is empty")
            object.__setattr__(self, a, tuple(vals))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(getattr(self, a)) for a in AXES)

    def __len__(self) -> int:
        return int(np.prod(self.shape))

    def design(self, idx: Sequence[int]) -> DesignCandidate:
        return DesignCandidate(*(getattr(self, a)[i] for a, i in zip(AXES, idx)))

    def indices(self, stride: int = 1):
        axes = []
        for n in self.shape:
            sel = list(range(0, n, stride))
            if sel[-1] != n - 1:
                sel.append(n - 1)
            axes.append(sel)
        return itertools.product(*axes)

    @classmethod
    def from_dict(cls, d: Mapping) -> "CandidateGrid":
        unknown = set(d) - set(AXES)
        if unknown:
            raise PlanError(f"unknown candidate grid axes {sorted(unknown)}")
        return cls(**{k: tuple(v) for k, v in d.items()})

    def to_dict(self) -> dict:
        return {a: list(getattr(self, a)) for a in AXES}


@dataclass(frozen=True)
class FrontierPoint:
    design: DesignCandidate
    cost: float
    eens: float
    lole: float


@dataclass
class PlanResult:
    chosen: DesignCandidate | None
    chosen_evaluation: Evaluation | None
    frontier: list[FrontierPoint]
    stage_log: list[dict]
    targets: ReliabilityTargets  # as finally applied
    verified: bool | None
    diagnostic: Evaluation | None = None  # min-LOLE candidate when infeasible
    evaluated: int = 0

    @property
    def feasible(self) -> bool:
        return self.chosen is not None

    def summary(self) -> str:
        if self.chosen is None:
            d = self.diagnostic
            lines = ["No candidate met every target."]
            if d is not None:
                lines.append(f"Lowest-LOLE candidate {d.design.to_dict()} reaches {d.lole:.3f} h/yr "
                             f"and {d.eens:.1f} kWh/yr unserved.")
            return " ".join(lines)
        e = self.chosen_evaluation
        return (f"Chosen design {self.chosen.to_dict()} costs {e.lifecycle_cost:,.0f} over its lifetime, "
                f"expects {e.lole:.3f} h/yr of shortfall and {e.eens:.1f} kWh/yr unserved. "
                f"{len(self.frontier)} designs sit on the cost-reliability frontier.")

    def to_dict(self) -> dict:
        return {
            "status": "feasible" if self.feasible else "infeasible",
            "chosen": None if self.chosen is None else self.chosen.to_dict(),
            "chosen_evaluation": None if self.chosen_evaluation is None else self.chosen_evaluation.to_dict(),
            "verified": self.verified,
            "targets_applied": self.targets.to_dict(),
            "frontier": [{"design": p.design.to_dict(), "cost": p.cost, "eens_kwh_per_yr": p.eens,
                          "lole_h_per_yr": p.lole} for p in self.frontier],
            "diagnostic": None if self.diagnostic is None else self.diagnostic.to_dict(),
            "candidates_evaluated": self.evaluated,
            "stage_log": self.stage_log,
            "summary": self.summary(),
        }

    def frontier_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("cost", "eens_kwh_per_yr", "lole_h_per_yr") + AXES)
        for p in self.frontier:
            w.writerow([repr(p.cost), repr(p.eens), repr(p.lole)] + [repr(v) for v in p.design.key])
        return buf.getvalue()


def pareto_front(points: Sequence[FrontierPoint]) -> list[FrontierPoint]:
    """Non-dominated points in (cost, EENS, LOLE), sorted by cost."""
    front = []
    for p in points:
        dominated = False
        for q in points:
            if q is p:
                continue
            le = q.cost <= p.cost and q.eens <= p.eens and q.lole <= p.lole
            lt = q.cost < p.cost or q.eens < p.eens or q.lole < p.lole
            if le and lt:
                dominated = True
                break
        if not dominated:
            front.append(p)
    # identical points: keep the first in grid order
    seen, out = set(), []
    for p in sorted(front, key=lambda p: (p.cost, p.eens, p.lole)):
        k = (p.cost, p.eens, p.lole)
        if k not in seen:
            seen.add(k)
            out.append(p)
    return out


class _Evaluator:
    def __init__(self, grid, template, scenario_set, policy, cost_model, mcs_config, threads):
        self.grid = grid
        self.args = (template, scenario_set, policy, cost_model, mcs_config)
        self.threads = threads
        self.cache: dict[tuple, Evaluation] = {}
        self.order: list[tuple] = []

    def __call__(self, idxs: Sequence[tuple]) -> list[Evaluation]:
        todo = [i for i in dict.fromkeys(idxs) if i not in self.cache]
        designs = [self.grid.design(i) for i in todo]
        if self.threads > 1 and len(designs) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as ex:
                evs = list(ex.map(lambda d: evaluate(d, *self.args), designs))
        else:
            evs = [evaluate(d, *self.args) for d in designs]
        for i, ev in zip(todo, evs):
            self.cache[i] = ev
            self.order.append(i)
        return [self.cache[i] for i in idxs]


def search(grid: CandidateGrid, targets: ReliabilityTargets, cost_model: CostModel, template: SystemModel,
           scenario_set: ScenarioSet, policy: DispatchPolicy | None = None, mcs_config: McsConfig | None = None,
           verify_mcs: McsConfig | None = None, protection: ProtectionRules = ProtectionRules(),
           coarse_stride: int = 1, min_storage_kwh: float = 0.0, threads: int = 1,
           max_outer_loops: int = MAX_OUTER_LOOPS) -> PlanResult:
    """Cheapest candidate meeting every target, with frontier and stage log.

    With ``coarse_stride`` 1 every candidate is screened, so the choice is
    the exhaustive optimum; larger strides screen a sub-grid and rely on the
    axis-wise refinement.
    """
    if len(grid) == 0:
        raise PlanError("candidate grid is empty")
    if coarse_stride < 1:
        raise PlanError("coarse_stride must be >= 1")
    policy = policy or DispatchPolicy()
    log: list[dict] = []
    log.append({"stage": 1, "event": "inputs", "targets": targets.to_dict(), "voll": cost_model.voll,
                "budget_max": _num(cost_model.budget_max)})
    log.append({"stage": 2, "event": "scenarios", "scenario_ids": [s.id for s in scenario_set],
                "probabilities": scenario_set.probabilities.tolist(), "horizon_steps": scenario_set.horizon_steps})
    excluded: dict[tuple, str] = {}
    for idx in grid.indices():
        d = grid.design(idx)
        if d.storage_kwh < min_storage_kwh:
            excluded[idx] = "storage below scarcity bound"
    log.append({"stage": 3, "event": "constraints", "excluded": len(excluded), "min_storage_kwh": min_storage_kwh})
    log.append({"stage": 4, "event": "candidate grid", "size": len(grid), "shape": list(grid.shape),
                "coarse_stride": coarse_stride})

    ev = _Evaluator(grid, template, scenario_set, policy, cost_model, mcs_config, threads)
    protect_cache: dict[tuple, ProtectionCheck] = {}

    def admissible(idx) -> bool:
        if idx in excluded:
            return False
        return ev.cache[idx].capital_cost <= cost_model.budget_max

    def feasible(idx, tg) -> bool:
        return admissible(idx) and not violations(ev.cache[idx], tg)

    def rank(idx):
        e = ev.cache[idx]
        return (e.lifecycle_cost, idx)

    current = targets
    chosen_idx = None
    verified = None
    for outer in range(1, max_outer_loops + 1):
        while True:
            ev(list(grid.indices(coarse_stride)))
            pool = [i for i in ev.order if feasible(i, current)]
            best = min(pool, key=rank) if pool else None
            log.append({"stage": 5, "event": "screening", "loop": outer, "evaluated": len(ev.cache),
                        "feasible": len(pool), "best": None if best is None else grid.design(best).to_dict()})
            if best is not None:
                best = _refine(grid, best, ev, lambda i: feasible(i, current), rank, log, outer)
            if best is None:
                break
            pc = protect_cache.get(best) or protection_feasibility(grid.design(best), instantiate(grid.design(best), template), protection)
            protect_cache[best] = pc
            if pc.passed:
                log.append({"stage": 6, "event": "protection passed", "design": grid.design(best).to_dict(),
                            "fault_ratio": _num(pc.fault_ratio)})
                break
            excluded[best] = "protection: " + ", ".join(pc.reasons)
            log.append({"stage": 6, "event": "feedback to stage 3", "design": grid.design(best).to_dict(),
                        "reasons": list(pc.reasons), "fault_ratio": _num(pc.fault_ratio)})
        chosen_idx = best
        if best is None or verify_mcs is None:
            break
        hi = evaluate(grid.design(best), template, scenario_set, policy, cost_model, verify_mcs)
        viol = violations(hi, targets)
        if not viol:
            verified = True
            log.append({"stage": 7, "event": "verified", "loop": outer, "lole": hi.lole, "eens": hi.eens})
            break
        verified = False
        lole_max, eens_max = current.lole_max, current.eens_max
        tiers = dict(current.tier_shed_max)
        for metric, (value, limit) in viol.items():
            margin = value - limit
            if metric == "LOLE":
                lole_max = max(0.0, lole_max - margin)
            elif metric == "EENS":
                eens_max = max(0.0, eens_max - margin)
            else:
                tier = Priority(metric.split(":", 1)[1])
                tiers[tier] = max(0.0, tiers.get(tier, math.inf) - margin)
        current = ReliabilityTargets(lole_max, eens_max, tiers)
        log.append({"stage": 7, "event": "feedback to stage 5", "loop": outer,
                    "violations": {k: {"observed": v, "limit": l} for k, (v, l) in viol.items()},
                    "tightened_targets": current.to_dict()})
        if outer == max_outer_loops:
            log.append({"stage": 7, "event": "outer loop limit reached", "loops": outer})

    points = [FrontierPoint(grid.design(i), ev.cache[i].lifecycle_cost, ev.cache[i].eens, ev.cache[i].lole)
              for i in ev.order if admissible(i) and _tier_ok(ev.cache[i], current)]
    frontier = pareto_front(points)
    log.append({"stage": 8, "event": "frontier", "points": len(frontier)})
    diagnostic = None
    if chosen_idx is None:
        cand = [i for i in ev.order if i not in excluded] or list(ev.order)
        diag = min(cand, key=lambda i: (ev.cache[i].lole, ev.cache[i].eens, i))
        diagnostic = ev.cache[diag]
    log.append({"stage": 9, "event": "done", "feasible": chosen_idx is not None, "verified": verified})
    return PlanResult(
        None if chosen_idx is None else grid.design(chosen_idx),
        None if chosen_idx is None else ev.cache[chosen_idx],
        frontier, log, current, verified, diagnostic, len(ev.cache),
    )


def _tier_ok(e: Evaluation, targets: ReliabilityTargets) -> bool:
    return all(e.tier_shed[Priority(t).value] <= v for t, v in targets.tier_shed_max.items())


def _refine(grid: CandidateGrid, start: tuple, ev: _Evaluator, ok, rank, log: list, loop: int) -> tuple:
    """Axis-wise one-step moves to cheaper feasible neighbours until none improves."""
    cur = start
    moves = 0
    while True:
        nbrs = []
        for ax, n in enumerate(grid.shape):
            for step in (-1, 1):
                j = cur[ax] + step
                if 0 <= j < n:
                    nbrs.append(cur[:ax] + (j,) + cur[ax + 1:])
        ev(nbrs)
        better = [i for i in nbrs if ok(i) and rank(i) < rank(cur)]
        if not better:
            break
        cur = min(better, key=rank)
        moves += 1
    log.append({"stage": 5, "event": "refinement", "loop": loop, "moves": moves, "design": grid.design(cur).to_dict()})
    return cur


# -------------------------------------------------------------- storage hint


def storage_duration_recommendation(events: Sequence[ScarcityEvent], p: float = 0.95) -> float:
    """Tail scarcity duration (hours) a storage fleet should bridge."""
    return scarcity_percentile(events, p)


def storage_energy_bound(duration_h: float, load_kw: float) -> float:
    """Minimum storage energy (kWh) to carry ``load_kw`` through ``duration_h``."""
    if duration_h < 0 or load_kw < 0:
        raise PlanError("duration and load must be >= 0")
    return duration_h * load_kw

