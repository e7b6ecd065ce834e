"""Reliability indices: load point, customer weighted and adequacy.

Load-point indices come either from the radial closed form (sum of
component rates, rate-weighted repair times) or from Monte Carlo estimates.
Customer indices weight per-load-point interruption statistics by customer
counts. Adequacy indices are either deterministic margins or probability
weighted shortfall statistics over a set of dispatch traces.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dispatch import SHED_TOL, DispatchTrace, TraceSummary, lp_load_matrix
from .scenario_engine import Scenario, ScenarioSet
from .system_model import HOURS_PER_YEAR, TIERS, NotRadialError, Priority, SystemModel

PRM_GUIDANCE_BAND = (6.0, 30.0)  # percent
LOLE_BENCHMARK_H = 2.4  # hours/year, i.e. 0.1 day/year
PRM_RENEWABLE_CAVEAT = (
    "PRM counts variable renewables at nameplate; with a large renewable share the margin "
    "can look comfortable while energy shortfalls still occur"
)


class IndicesError(ValueError):
    """Raised when indices cannot be formed from the given inputs."""


# ------------------------------------------------------------- load points


@dataclass(frozen=True)
class LoadPointIndices:
    lp_ids: tuple[str, ...]
    lambda_i: np.ndarray  # interruptions / year
    u_i: np.ndarray  # hours / year

    @property
    def r_i(self) -> list[float | None]:
        """Hours per interruption; None where no interruptions are expected."""
        return [float(u / lam) if lam > 0 else None for lam, u in zip(self.lambda_i, self.u_i)]

    def to_dict(self) -> dict:
        return {
            lp: {"lambda_per_yr": float(lam), "U_h_per_yr": float(u), "r_h": r}
            for lp, lam, u, r in zip(self.lp_ids, self.lambda_i, self.u_i, self.r_i)
        }


def load_point_analytic(model: SystemModel, year: float = 0.0) -> LoadPointIndices:
    """Radial closed form: lambda_i = sum(lambda_c), U_i = sum(lambda_c / mu_c) in hours."""
    lams, us = [], []
    for lp in model.load_points:
        if not lp.is_radial:
            raise NotRadialError(f"load point {lp.id!r} is not radial; use MCS evaluation")
        (path,) = [p for p in lp.supply_paths if p]
        lam = u = 0.0
        for cid in sorted(path):
            c = model.component(cid)
            rate = c.rate_at(year)
            lam += rate
            if rate > 0:
                u += rate * c.mean_repair_hours
        lams.append(lam)
        us.append(u)
    return LoadPointIndices(tuple(lp.id for lp in model.load_points), np.array(lams), np.array(us))


def from_estimate(est) -> LoadPointIndices:
    return LoadPointIndices(tuple(est.lp_ids), np.asarray(est.lambda_i, float), np.asarray(est.u_i, float))


# -------------------------------------------------------------- customers


@dataclass(frozen=True)
class CustomerIndices:
    saifi: float  # interruptions / customer / year
    saidi: float  # hours / customer / year
    maifi: float  # momentary interruptions / customer / year
    caifi: float | None  # interruptions / affected customer / year
    caidi: float  # hours / interruption
    cemi_n: float | None  # fraction of customers with more than n sustained interruptions per period
    n: int
    momentary_threshold_h: float

    def to_dict(self) -> dict:
        return {
            "SAIFI": self.saifi, "SAIDI": self.saidi, "MAIFI": self.maifi, "CAIFI": self.caifi,
            "CAIDI": self.caidi, f"CEMI_{self.n}": self.cemi_n, "n": self.n,
            "momentary_threshold_min": self.momentary_threshold_h * 60.0,
        }


def _check_customers(model: SystemModel) -> np.ndarray:
    counts = np.array([lp.customer_count for lp in model.load_points], dtype=float)
    if counts.sum() <= 0:
        raise IndicesError("total customer count is zero")
    return counts


def lp_statistics(logs, lp_ids: Sequence[str], momentary_threshold_h: float):
    """Per-iteration (sustained count, sustained hours, momentary count) arrays."""
    pos = {lp: j for j, lp in enumerate(lp_ids)}
    n_it = len(logs)
    k = np.zeros((n_it, len(lp_ids)))
    h = np.zeros((n_it, len(lp_ids)))
    m = np.zeros((n_it, len(lp_ids)))
    for r, log in enumerate(logs):
        for it in log.interruptions:
            j = pos[it.load_point]
            d = it.end - it.start
            if d < momentary_threshold_h:
                m[r, j] += 1
            else:
                k[r, j] += 1
                h[r, j] += d
    return k, h, m


def customer_indices(logs, model: SystemModel, momentary_threshold_h: float = 5.0 / 60.0,
                     n_for_cemi: int = 1) -> CustomerIndices:
    """Customer-weighted indices from Monte Carlo outage logs.

    Frequencies and durations are averaged over iterations and divided by the
    horizon in years. CEMIn refers to one iteration horizon as the reporting
    period.
    """
    counts = _check_customers(model)
    total = float(counts.sum())
    if n_for_cemi < 0:
        raise IndicesError("n for CEMIn must be >= 0")
    if not logs:
        return CustomerIndices(0.0, 0.0, 0.0, None, 0.0, 0.0, n_for_cemi, momentary_threshold_h)
    years = logs[0].horizon_hours / HOURS_PER_YEAR
    k, h, m = lp_statistics(logs, [lp.id for lp in model.load_points], momentary_threshold_h)
    cust_int = float((k @ counts).mean()) / years
    saifi = cust_int / total
    saidi = float((h @ counts).mean()) / years / total
    maifi = float((m @ counts).mean()) / years / total
    affected = float(((k > 0) @ counts).mean())
    caifi = cust_int / affected if affected > 0 else None
    caidi = saidi / saifi if saifi > 0 else 0.0
    cemi = float(((k > n_for_cemi) @ counts).mean()) / total
    return CustomerIndices(saifi, saidi, maifi, caifi, caidi, cemi, n_for_cemi, momentary_threshold_h)


def customer_indices_from_rates(model: SystemModel, lambda_i, u_i, m_i=None,
                                momentary_threshold_h: float = 5.0 / 60.0) -> CustomerIndices:
    """Customer indices from expected per-load-point rates.

    CAIFI takes load points with a positive rate as affected; CEMIn needs a
    count distribution and is reported absent.
    """
    counts = _check_customers(model)
    total = float(counts.sum())
    lam = np.asarray(lambda_i, float)
    u = np.asarray(u_i, float)
    m = np.zeros_like(lam) if m_i is None else np.asarray(m_i, float)
    cust_int = float(lam @ counts)
    saifi = cust_int / total
    saidi = float(u @ counts) / total
    affected = float(counts[lam > 0].sum())
    return CustomerIndices(
        saifi, saidi, float(m @ counts) / total,
        cust_int / affected if affected > 0 else None,
        saidi / saifi if saifi > 0 else 0.0,
        None, 1, momentary_threshold_h,
    )


# --------------------------------------------------------------- adequacy


@dataclass(frozen=True)
class DeterministicAdequacy:
    prm: float  # percent
    erm: float  # percent
    capacity_kw: float
    peak_kw: float
    available_energy_kwh: float
    demand_energy_kwh: float
    guidance_band: tuple[float, float] = PRM_GUIDANCE_BAND
    caveats: tuple[str, ...] = ()

    @property
    def within_band(self) -> bool:
        return self.guidance_band[0] <= self.prm <= self.guidance_band[1]

    def to_dict(self) -> dict:
        return {
            "PRM_pct": self.prm, "ERM_pct": self.erm, "capacity_kw": self.capacity_kw, "peak_kw": self.peak_kw,
            "available_energy_kwh": self.available_energy_kwh, "demand_energy_kwh": self.demand_energy_kwh,
            "prm_guidance_band_pct": list(self.guidance_band), "prm_within_band": self.within_band,
            "caveats": list(self.caveats),
        }


def reserve_margin(capacity: float, peak: float) -> float:
    if peak <= 0:
        raise IndicesError("peak load must be positive")
    return (capacity - peak) / peak * 100.0


def energy_margin(available: float, demand: float) -> float:
    if demand <= 0:
        raise IndicesError("demand energy must be positive")
    return (available - demand) / demand * 100.0


def adequacy_deterministic(model: SystemModel, scenario: Scenario) -> DeterministicAdequacy:
    """Capacity margin at the peak step and hourly energy margin over the horizon."""
    if scenario.horizon_steps == 0:
        raise IndicesError("scenario is empty")
    load = lp_load_matrix(model, scenario).sum(axis=1)
    dt = scenario.step_hours
    capacity = sum(g.rated_capacity for g in model.generators)
    firm = model.capacity("dispatchable")
    avail = (firm + model.capacity("pv") * scenario.pv_cf_series.values
             + model.capacity("wind") * scenario.wind_cf_series.values)
    e_avail = float(avail.sum() * dt)
    e_dem = float(load.sum() * dt)
    prm = reserve_margin(capacity, float(load.max()))
    erm = energy_margin(e_avail, e_dem)
    caveats = (PRM_RENEWABLE_CAVEAT,) if capacity > firm else ()
    return DeterministicAdequacy(prm, erm, capacity, float(load.max()), e_avail, e_dem, PRM_GUIDANCE_BAND, caveats)


@dataclass(frozen=True)
class AdequacyIndices:
    lolp: float  # fraction of steps
    lole: float  # hours / horizon
    lpsp: float  # fraction of demand energy
    eens: float  # kWh / horizon
    horizon_hours: float
    step_hours: float
    demand_energy: float  # expected kWh / horizon

    @property
    def lole_per_year(self) -> float:
        return self.lole * HOURS_PER_YEAR / self.horizon_hours

    @property
    def eens_per_year(self) -> float:
        return self.eens * HOURS_PER_YEAR / self.horizon_hours

    def to_dict(self) -> dict:
        return {
            "LOLP": self.lolp, "LOLE_h": self.lole, "LPSP": self.lpsp, "EENS_kwh": self.eens,
            "horizon_hours": self.horizon_hours, "step_hours": self.step_hours,
            "expected_demand_kwh": self.demand_energy,
            "LOLE_h_per_yr": self.lole_per_year, "EENS_kwh_per_yr": self.eens_per_year,
            "LOLE_benchmark_h_per_yr": LOLE_BENCHMARK_H,
        }


def adequacy_from_series(unserved: Sequence, demand: Sequence, probabilities: Sequence[float],
                         step_hours: float) -> AdequacyIndices:
    """Probability-weighted shortfall statistics over aligned per-scenario series (kW)."""
    probs = np.asarray(probabilities, float)
    if len(unserved) != probs.size or len(demand) != probs.size:
        raise IndicesError("one unserved and one demand series per scenario required")
    T = len(unserved[0]) if probs.size else 0
    if T == 0:
        raise IndicesError("series are empty")
    count = 0.0
    eens = 0.0
    dem = 0.0
    for p, u, d in zip(probs.tolist(), unserved, demand):
        u = np.asarray(u, float)
        d = np.asarray(d, float)
        if u.size != T or d.size != T:
            raise IndicesError("all series must share the horizon")
        count += p * float(np.count_nonzero(u > SHED_TOL))
        eens += p * float(u.sum()) * step_hours
        dem += p * float(d.sum()) * step_hours
    lolp = count / T
    lole = count * step_hours
    lpsp = eens / dem if dem > 0 else 0.0
    return AdequacyIndices(lolp, lole, lpsp, eens, T * step_hours, step_hours, dem)


def adequacy_probabilistic(traces: Mapping[str, DispatchTrace | TraceSummary],
                           scenario_set: ScenarioSet) -> AdequacyIndices:
    """LOLP, LOLE, LPSP and EENS over one trace per scenario, keyed by scenario id."""
    missing = [s.id for s in scenario_set if s.id not in traces]
    if missing:
        raise IndicesError(f"missing trace for scenario(s) {missing}")
    ordered = [traces[s.id] for s in scenario_set]
    return adequacy_from_series([t.unserved for t in ordered], [t.load for t in ordered],
                                scenario_set.probabilities, scenario_set.step_hours)


# ---------------------------------------------------------- interruption cost


@dataclass(frozen=True)
class DamageCurve:
    """Piecewise-linear outage cost (currency per event) against duration in hours.

    An implicit (0 h, 0) knot precedes the first knot; beyond the last knot
    the final slope continues.
    """

    durations_h: tuple[float, ...]
    costs: tuple[float, ...]

    def __post_init__(self):
        d = np.asarray(self.durations_h, float)
        c = np.asarray(self.costs, float)
        if d.size == 0 or d.size != c.size:
            raise IndicesError("damage curve needs matching, non-empty knot lists")
        if np.any(np.diff(d) <= 0) or d[0] < 0:
            raise IndicesError("damage curve durations must be increasing and non-negative")
        if np.any(np.diff(c) < 0) or c[0] < 0:
            raise IndicesError("damage curve must be non-decreasing and non-negative")

    def __call__(self, duration_h: float) -> float:
        d = np.asarray(self.durations_h, float)
        c = np.asarray(self.costs, float)
        if d[0] > 0:
            d = np.concatenate([[0.0], d])
            c = np.concatenate([[0.0], c])
        if duration_h <= d[-1] or d.size < 2:
            return float(np.interp(duration_h, d, c))
        slope = (c[-1] - c[-2]) / (d[-1] - d[-2])
        return float(c[-1] + slope * (duration_h - d[-1]))


@dataclass(frozen=True)
class InterruptionCost:
    energy_cost: float
    damage_cost: float
    voll: dict

    @property
    def total_cost(self) -> float:
        return self.energy_cost + self.damage_cost

    def to_dict(self) -> dict:
        return {"energy_cost": self.energy_cost, "damage_cost": self.damage_cost, "total_cost": self.total_cost,
                "voll_per_kwh": self.voll}


def _tier_map(values, name: str) -> dict[Priority, float]:
    if isinstance(values, Mapping):
        return {Priority(k): float(v) for k, v in values.items()}
    if np.ndim(values) == 0:
        return {t: float(values) for t in TIERS}
    if len(values) != len(TIERS):
        raise IndicesError(f"{name} needs one value per tier")
    return {t: float(v) for t, v in zip(TIERS, values)}


def interruption_cost(eens_by_tier, voll, cdf: Mapping | None = None,
                      event_durations: Sequence[tuple] = ()) -> InterruptionCost:
    """Energy term sum(EENS_tier * VOLL_tier) plus damage term sum(cdf_tier(duration)).

    ``event_durations`` holds (tier, hours) pairs; events of tiers without a
    curve add nothing.
    """
    v = _tier_map(voll, "voll")
    if any(x < 0 for x in v.values()):
        raise IndicesError("VOLL must be non-negative")
    e = _tier_map(eens_by_tier, "eens_by_tier")
    energy = sum(e.get(t, 0.0) * v.get(t, 0.0) for t in TIERS)
    curves = {Priority(k): c for k, c in (cdf or {}).items()}
    damage = 0.0
    for tier, hours in event_durations:
        curve = curves.get(Priority(tier))
        if curve is not None:
            damage += curve(float(hours))
    return InterruptionCost(float(energy), float(damage), {t.value: x for t, x in v.items()})


# ----------------------------------------------------------------- advisor


@dataclass(frozen=True)
class Recommendation:
    metrics: str
    captures: str
    strengths: str
    limitations: str
    guidance: str


@dataclass(frozen=True)
class Advice:
    context: str
    title: str
    rows: tuple[Recommendation, ...]

    @property
    def metrics(self) -> tuple[str, ...]:
        """Individual metric names across all rows, in table order."""
        out = []
        for r in self.rows:
            for part in r.metrics.replace(" + ", ", ").replace(" (with VOLL/CDF)", "").split(", "):
                out.append(part.strip())
        return tuple(out)

    def to_dict(self) -> dict:
        return {"context": self.context, "title": self.title,
                "rows": [r.__dict__.copy() for r in self.rows], "metrics": list(self.metrics)}

    def to_text(self) -> str:
        lines = [f"{self.title} [{self.context}]"]
        for r in self.rows:
            lines += [f"  Recommended: {r.metrics}", f"    captures:    {r.captures}",
                      f"    strengths:   {r.strengths}", f"    limitations: {r.limitations}",
                      f"    guidance:    {r.guidance}"]
        return "\n".join(lines)


ADVISOR = {
    "topology-weak-points": Advice("topology-weak-points", "Topology and weak-point identification", (
        Recommendation(
            "λ_i, U_i, d_i",
            "which buses are interrupted most often and for longest",
            "locates structurally weak buses; feeds every system-level index",
            "sees component faults only, not shortfalls from low renewables or empty storage",
            "rank buses for reinforcement, redundancy and protection placement; pair with adequacy indices",
        ),
    )),
    "adequacy": Advice("adequacy", "Generation and storage adequacy", (
        Recommendation(
            "LOLP, LOLE, LPSP",
            "probability, duration and energy fraction of supply shortfall",
            "probabilistic; reflects variable renewables and demand; LOLE has a 0.1 day/yr benchmark",
            "blind to shortfall size; data hungry; LPSP hides timing",
            "Combine LOLP/LOLE with EENS so both occurrence and size are covered; LPSP suits islanded sizing",
        ),
        Recommendation(
            "PRM, ERM",
            "capacity or energy surplus over demand",
            "simple to compute and explain",
            "deterministic; ignores variability and storage behaviour",
            "screening only; back up with the probabilistic indices for renewable-heavy systems",
        ),
    )),
    "customer-service-quality": Advice("customer-service-quality", "Customer service quality", (
        Recommendation(
            "SAIFI + SAIDI",
            "interruption frequency and duration seen by the average customer",
            "standard regulatory pair",
            "annual averages hide clustering; customers treated alike; ignores energy",
            "use for reporting and trends; add CAIFI/CEMI_n for concentrated exposure and EENS for energy",
        ),
        Recommendation(
            "CAIFI, CAIDI, MAIFI, CEMI_n",
            "exposure, restoration speed, momentary and repeat interruptions",
            "exposes the worst-served customers",
            "threshold choices are arbitrary; no critical/non-critical distinction",
            "use for equity analysis and detailed outage characterization",
        ),
    )),
    "cost-reliability-tradeoff": Advice("cost-reliability-tradeoff", "Cost-reliability trade-off and investment", (
        Recommendation(
            "EENS (with VOLL/CDF)",
            "expected unserved energy, convertible to money via VOLL or damage curves",
            "measures shortfall size; direct economic valuation; fits constrained sizing",
            "one scalar hides timing and location; depends on dispatch and VOLL assumptions",
            "central sizing metric; multiply by VOLL for cost and pair with LOLE",
        ),
    )),
    "regulatory": Advice("regulatory", "Regulatory compliance and benchmarking", (
        Recommendation(
            "SAIFI + SAIDI + LOLE",
            "customer interruption performance plus generation adequacy compliance",
            "matches utility reporting and planning benchmarks",
            "built for centralized systems; annual figures mask seasonal risk",
            "baseline reporting set; add EENS and per-load analysis for renewable microgrids",
        ),
    )),
}
CONTEXTS = tuple(ADVISOR)


def advise(context: str) -> Advice:
    try:
        return ADVISOR[context]
    except KeyError:
        raise IndicesError(f"unknown decision context {context!r}; valid contexts: {', '.join(CONTEXTS)}") from None


# ------------------------------------------------------------------ report


@dataclass
class IndexReport:
    load_points: LoadPointIndices | None = None
    customer: CustomerIndices | None = None
    deterministic: DeterministicAdequacy | None = None
    probabilistic: AdequacyIndices | None = None
    cost: InterruptionCost | None = None
    horizon_hours: float | None = None
    thresholds: dict = field(default_factory=dict)
    caveats: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out: dict = {"horizon_hours": self.horizon_hours, "thresholds": dict(self.thresholds)}
        if self.load_points is not None:
            out["load_point"] = self.load_points.to_dict()
        if self.customer is not None:
            out["customer"] = self.customer.to_dict()
        if self.deterministic is not None:
            out["adequacy_deterministic"] = self.deterministic.to_dict()
        if self.probabilistic is not None:
            out["adequacy_probabilistic"] = self.probabilistic.to_dict()
        if self.cost is not None:
            out["interruption_cost"] = self.cost.to_dict()
        caveats = list(self.caveats)
        if self.deterministic is not None:
            caveats += [c for c in self.deterministic.caveats if c not in caveats]
        out["caveats"] = caveats
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False, default=_json_default)

    def rows(self) -> list[tuple[str, str, object, str]]:
        """(scope, index, value, unit) rows for the CSV summary."""
        rows = []
        if self.load_points is not None:
            for lp, vals in self.load_points.to_dict().items():
                rows += [(lp, "lambda", vals["lambda_per_yr"], "1/yr"), (lp, "U", vals["U_h_per_yr"], "h/yr"),
                         (lp, "r", vals["r_h"], "h")]
        if self.customer is not None:
            c = self.customer
            rows += [("system", "SAIFI", c.saifi, "1/customer/yr"), ("system", "SAIDI", c.saidi, "h/customer/yr"),
                     ("system", "MAIFI", c.maifi, "1/customer/yr"), ("system", "CAIFI", c.caifi, "1/affected customer/yr"),
                     ("system", "CAIDI", c.caidi, "h"), ("system", f"CEMI_{c.n}", c.cemi_n, "fraction")]
        if self.deterministic is not None:
            rows += [("system", "PRM", self.deterministic.prm, "%"), ("system", "ERM", self.deterministic.erm, "%")]
        if self.probabilistic is not None:
            a = self.probabilistic
            rows += [("system", "LOLP", a.lolp, "fraction"), ("system", "LOLE", a.lole, "h/horizon"),
                     ("system", "LPSP", a.lpsp, "fraction"), ("system", "EENS", a.eens, "kWh/horizon")]
        if self.cost is not None:
            rows += [("system", "interruption_cost", self.cost.total_cost, "currency")]
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("scope", "index", "value", "unit"))
        for scope, name, value, unit in self.rows():
            w.writerow((scope, name, "" if value is None else repr(float(value)), unit))
        return buf.getvalue()


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def finite_or_none(x: float) -> float | None:
    return None if x is None or not math.isfinite(x) else float(x)
