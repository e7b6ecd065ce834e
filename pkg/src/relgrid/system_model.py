"""Physical and customer description of a microgrid.

Components carry failure/repair rates, load points carry customer counts,
hourly and monthly load shape weights and explicit supply paths. The structural
analysis here maps a set of unavailable components to the load points that
lose supply.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

HOURS_PER_YEAR = 8760.0
SCHEMA_VERSION = 1
DEFAULT_ENUMERATION_LIMIT = 2**20


class ModelError(ValueError):
    """Malformed system description."""


class TopologyTooLargeError(ModelError):
    pass


class NotRadialError(ModelError):
    pass


class ComponentKind(str, Enum):
    LINE = "line"
    TRANSFORMER = "transformer"
    INVERTER = "inverter"
    DISPATCHABLE = "dispatchable-unit"
    PV = "pv-unit"
    WIND = "wind-unit"
    STORAGE = "storage-unit"
    GRID_TIE = "grid-tie"


class Priority(str, Enum):
    CRITICAL = "critical"
    ESSENTIAL = "essential"
    NON_CRITICAL = "non-critical"


# Fixed tier index used by every per-tier array in the package.
TIERS: tuple[Priority, ...] = (Priority.CRITICAL, Priority.ESSENTIAL, Priority.NON_CRITICAL)
TIER_INDEX = {p: i for i, p in enumerate(TIERS)}


@dataclass(frozen=True)
class RateSegment:
    """Constant failure rate over calendar years [start_year, end_year)."""

    start_year: float
    end_year: float | None
    rate: float


@dataclass(frozen=True)
class Component:
    id: str
    kind: ComponentKind
    failure_rate: float | tuple[RateSegment, ...]
    repair_rate: float

    def rate_at(self, year: float = 0.0) -> float:
        """Failure rate (occurrences/year) in force at ``year``."""
        if not isinstance(self.failure_rate, tuple):
            return float(self.failure_rate)
        for seg in self.failure_rate:
            if seg.start_year <= year and (seg.end_year is None or year < seg.end_year):
                return seg.rate
        # past the last closed segment: hold the final rate
        return self.failure_rate[-1].rate

    @property
    def mean_repair_hours(self) -> float:
        return HOURS_PER_YEAR / self.repair_rate if self.repair_rate > 0 else 0.0

    @property
    def can_fail(self) -> bool:
        if isinstance(self.failure_rate, tuple):
            return any(s.rate > 0 for s in self.failure_rate)
        return self.failure_rate > 0


@dataclass(frozen=True)
class LoadPoint:
    id: str
    customer_count: int
    peak_load: float
    supply_paths: tuple[frozenset[str], ...]
    hourly_weights: tuple[float, ...] = (1.0,) * 24
    monthly_weights: tuple[float, ...] = (1.0,) * 12
    priority: Priority = Priority.NON_CRITICAL

    @property
    def is_radial(self) -> bool:
        return len(self.supply_paths) == 1


@dataclass(frozen=True)
class GeneratorUnit:
    id: str
    kind: str  # "dispatchable" | "pv" | "wind"
    rated_capacity: float
    component_ref: str | None = None
    marginal_cost: float | None = None


@dataclass(frozen=True)
class StorageUnit:
    id: str
    energy_capacity: float
    power_rating: float
    charge_efficiency: float = 0.95
    discharge_efficiency: float = 0.95
    soc_min: float = 0.1
    soc_max: float = 1.0
    initial_soc: float = 0.5
    component_ref: str | None = None


@dataclass(frozen=True)
class SystemModel:
    components: tuple[Component, ...]
    load_points: tuple[LoadPoint, ...]
    generators: tuple[GeneratorUnit, ...] = ()
    storage_units: tuple[StorageUnit, ...] = ()
    grid_connected: bool = False
    grid_import_limit: float = math.inf
    grid_export_limit: float = 0.0
    grid_tie: str | None = None
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {c.id: c for c in self.components})

    @property
    def total_customers(self) -> int:
        return sum(lp.customer_count for lp in self.load_points)

    def component(self, cid: str) -> Component:
        try:
            return self._index[cid]
        except KeyError:
            raise ModelError(f"unresolved component id {cid!r}") from None

    def load_point(self, lp_id: str) -> LoadPoint:
        for lp in self.load_points:
            if lp.id == lp_id:
                return lp
        raise ModelError(f"unknown load point {lp_id!r}")

    def capacity(self, kind: str) -> float:
        return sum(g.rated_capacity for g in self.generators if g.kind == kind)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(model: SystemModel, horizon_years: float | None = None) -> ValidationReport:
    """Collect every invariant violation; an empty report means well-formed."""
    v: list[str] = []
    ids = [c.id for c in model.components]
    for dup in sorted({i for i in ids if ids.count(i) > 1}):
        v.append(f"duplicate component id {dup!r}")
    known = set(ids)

    for c in model.components:
        if isinstance(c.failure_rate, tuple):
            v.extend(_check_schedule(c, horizon_years))
        elif c.failure_rate < 0:
            v.append(f"component {c.id!r}: negative failure rate")
        if c.can_fail and not c.repair_rate > 0:
            v.append(f"component {c.id!r}: repair rate must be positive when failure rate is positive")
        if c.repair_rate < 0:
            v.append(f"component {c.id!r}: negative repair rate")

    if not model.load_points:
        v.append("no load points")
    for lp in model.load_points:
        if lp.customer_count < 1:
            v.append(f"load point {lp.id!r}: customer_count must be >= 1")
        if lp.peak_load < 0:
            v.append(f"load point {lp.id!r}: negative peak load")
        if len(lp.hourly_weights) != 24 or len(lp.monthly_weights) != 12:
            v.append(f"load point {lp.id!r}: expected 24 hourly and 12 monthly weights")
        if any(w < 0 for w in (*lp.hourly_weights, *lp.monthly_weights)):
            v.append(f"load point {lp.id!r}: negative weight")
        if not any(lp.supply_paths):
            v.append(f"load point {lp.id!r}: no non-empty supply path")
        for path in lp.supply_paths:
            for cid in sorted(path - known):
                v.append(f"load point {lp.id!r}: unresolved component id {cid!r}")

    for g in model.generators:
        if g.kind not in ("dispatchable", "pv", "wind"):
            v.append(f"generator {g.id!r}: unknown kind {g.kind!r}")
        if not g.rated_capacity > 0:
            v.append(f"generator {g.id!r}: rated capacity must be positive")
        if g.kind in ("pv", "wind") and g.marginal_cost is not None:
            v.append(f"generator {g.id!r}: variable renewables carry no marginal cost")
        if g.component_ref is not None and g.component_ref not in known:
            v.append(f"generator {g.id!r}: unresolved component id {g.component_ref!r}")

    for s in model.storage_units:
        if s.soc_min == s.soc_max:
            v.append(f"storage {s.id!r}: degenerate SoC band")
        elif not (0 <= s.soc_min < s.soc_max <= 1):
            v.append(f"storage {s.id!r}: SoC band must satisfy 0 <= soc_min < soc_max <= 1")
        if not (s.soc_min <= s.initial_soc <= s.soc_max):
            v.append(f"storage {s.id!r}: initial SoC outside band")
        for name in ("charge_efficiency", "discharge_efficiency"):
            eff = getattr(s, name)
            if not (0 < eff <= 1):
                v.append(f"storage {s.id!r}: {name} must lie in (0, 1]")
        if s.energy_capacity < 0 or s.power_rating < 0:
            v.append(f"storage {s.id!r}: negative size")
        if s.component_ref is not None and s.component_ref not in known:
            v.append(f"storage {s.id!r}: unresolved component id {s.component_ref!r}")

    if model.grid_tie is not None and model.grid_tie not in known:
        v.append(f"grid: unresolved component id {model.grid_tie!r}")
    if model.grid_import_limit < 0 or model.grid_export_limit < 0:
        v.append("grid: negative exchange limit")
    return ValidationReport(v)


def _check_schedule(c: Component, horizon_years: float | None) -> list[str]:
    out = []
    segs = c.failure_rate
    if not segs:
        return [f"component {c.id!r}: empty failure-rate schedule"]
    if segs[0].start_year != 0:
        out.append(f"component {c.id!r}: failure-rate schedule must start at year 0")
    for a, b in zip(segs, segs[1:]):
        if a.end_year is None or a.end_year != b.start_year:
            out.append(f"component {c.id!r}: gap or overlap in failure-rate schedule at year {a.end_year}")
    for s in segs:
        if s.rate < 0:
            out.append(f"component {c.id!r}: negative failure rate")
        if s.end_year is not None and s.end_year <= s.start_year:
            out.append(f"component {c.id!r}: empty schedule segment")
    last = segs[-1].end_year
    if horizon_years is not None and last is not None and last < horizon_years:
        out.append(f"component {c.id!r}: failure-rate schedule ends before horizon ({last} < {horizon_years})")
    return out


def interrupting_sets(
    model: SystemModel, load_point: str | LoadPoint, limit: int = DEFAULT_ENUMERATION_LIMIT
) -> list[frozenset[str]]:
    """Minimal component sets whose joint outage de-energizes ``load_point``.

    A set interrupts the load point when it hits every supply path, so the
    minimal sets are the minimal transversals of the path family. They are
    enumerated by picking one component per path and discarding supersets.
    Sorted by size, then lexicographically.
    """
    lp = load_point if isinstance(load_point, LoadPoint) else model.load_point(load_point)
    paths = [p for p in lp.supply_paths if p]
    if not paths:
        raise ModelError(f"load point {lp.id!r} has no supply path")
    # a path that contains another path never matters for hitting sets
    paths = [p for p in paths if not any(q < p for q in paths)]
    paths = sorted(set(paths), key=lambda p: sorted(p))
    combos = math.prod(len(p) for p in paths)
    if combos > limit:
        raise TopologyTooLargeError(
            f"topology too large for exact enumeration: {combos} path combinations > {limit}"
        )
    candidates = {frozenset(pick) for pick in itertools.product(*(sorted(p) for p in paths))}
    minimal = [c for c in candidates if not any(o < c for o in candidates)]
    return sorted(minimal, key=lambda s: (len(s), sorted(s)))


def is_energized(lp: LoadPoint, unavailable: Iterable[str]) -> bool:
    down = set(unavailable)
    return any(p and not (p & down) for p in lp.supply_paths)


def radial_equivalent_rate(model: SystemModel, load_point: str | LoadPoint, year: float = 0.0) -> float:
    """Series-path failure rate of a radial load point (occurrences/year)."""
    lp = load_point if isinstance(load_point, LoadPoint) else model.load_point(load_point)
    if not lp.is_radial:
        raise NotRadialError(
            f"load point {lp.id!r} is not radial ({len(lp.supply_paths)} paths); use Monte Carlo evaluation"
        )
    return sum(model.component(c).rate_at(year) for c in lp.supply_paths[0])


def radial_path(parents: Mapping[str, tuple[str | None, str | None]], node: str) -> frozenset[str]:
    """Components between ``node`` and the feeder root.

    ``parents`` maps each node to ``(parent_node, component_on_the_edge)``;
    the root maps to ``(None, None)`` or to ``(None, component)`` for a source
    component such as a grid tie.
    """
    out: set[str] = set()
    seen = set()
    while node is not None:
        if node in seen:
            raise ModelError(f"cycle in radial feeder at {node!r}")
        seen.add(node)
        parent, comp = parents[node]
        if comp is not None:
            out.add(comp)
        node = parent
    return frozenset(out)


# --------------------------------------------------------------------- JSON io


def _rate_from_json(raw: Any, where: str):
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, list):
        return tuple(
            RateSegment(float(s["start_year"]), None if s.get("end_year") is None else float(s["end_year"]), float(s["rate"]))
            for s in raw
        )
    raise ModelError(f"{where}: failure_rate must be a number or a list of segments")


def model_from_dict(doc: Mapping[str, Any]) -> SystemModel:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ModelError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    try:
        comps = tuple(
            Component(
                id=str(c["id"]),
                kind=ComponentKind(c["kind"]),
                failure_rate=_rate_from_json(c.get("failure_rate", 0.0), f"component {c.get('id')}"),
                repair_rate=float(c.get("repair_rate", 0.0)),
            )
            for c in doc.get("components", [])
        )
        lps = tuple(
            LoadPoint(
                id=str(lp["id"]),
                customer_count=int(lp["customers"]),
                peak_load=float(lp["peak_kw"]),
                supply_paths=tuple(frozenset(map(str, p)) for p in lp["supply_paths"]),
                hourly_weights=tuple(float(w) for w in lp.get("hourly_weights", [1.0] * 24)),
                monthly_weights=tuple(float(w) for w in lp.get("monthly_weights", [1.0] * 12)),
                priority=Priority(lp.get("priority", "non-critical")),
            )
            for lp in doc.get("load_points", [])
        )
        gens = tuple(
            GeneratorUnit(
                id=str(g["id"]),
                kind=str(g["kind"]),
                rated_capacity=float(g["rated_kw"]),
                component_ref=g.get("component"),
                marginal_cost=None if g.get("marginal_cost") is None else float(g["marginal_cost"]),
            )
            for g in doc.get("generators", [])
        )
        stor = tuple(
            StorageUnit(
                id=str(s["id"]),
                energy_capacity=float(s["energy_kwh"]),
                power_rating=float(s["power_kw"]),
                charge_efficiency=float(s.get("charge_efficiency", 0.95)),
                discharge_efficiency=float(s.get("discharge_efficiency", 0.95)),
                soc_min=float(s.get("soc_min", 0.1)),
                soc_max=float(s.get("soc_max", 1.0)),
                initial_soc=float(s.get("initial_soc", 0.5)),
                component_ref=s.get("component"),
            )
            for s in doc.get("storage", [])
        )
    except KeyError as exc:
        raise ModelError(f"missing required key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ModelError(str(exc)) from None
    grid = doc.get("grid", {}) or {}
    imp = grid.get("import_limit_kw")
    return SystemModel(
        components=comps,
        load_points=lps,
        generators=gens,
        storage_units=stor,
        grid_connected=bool(grid.get("connected", False)),
        grid_import_limit=math.inf if imp is None else float(imp),
        grid_export_limit=float(grid.get("export_limit_kw", 0.0)),
        grid_tie=grid.get("component"),
    )


def model_to_dict(model: SystemModel) -> dict[str, Any]:
    def rate(c: Component):
        if isinstance(c.failure_rate, tuple):
            return [{"start_year": s.start_year, "end_year": s.end_year, "rate": s.rate} for s in c.failure_rate]
        return c.failure_rate

    return {
        "schema_version": SCHEMA_VERSION,
        "components": [
            {"id": c.id, "kind": c.kind.value, "failure_rate": rate(c), "repair_rate": c.repair_rate}
            for c in model.components
        ],
        "load_points": [
            {
                "id": lp.id,
                "customers": lp.customer_count,
                "peak_kw": lp.peak_load,
                "priority": lp.priority.value,
                "supply_paths": [sorted(p) for p in lp.supply_paths],
                "hourly_weights": list(lp.hourly_weights),
                "monthly_weights": list(lp.monthly_weights),
            }
            for lp in model.load_points
        ],
        "generators": [
            {"id": g.id, "kind": g.kind, "rated_kw": g.rated_capacity, "component": g.component_ref,
             "marginal_cost": g.marginal_cost}
            for g in model.generators
        ],
        "storage": [
            {"id": s.id, "energy_kwh": s.energy_capacity, "power_kw": s.power_rating,
             "charge_efficiency": s.charge_efficiency, "discharge_efficiency": s.discharge_efficiency,
             "soc_min": s.soc_min, "soc_max": s.soc_max, "initial_soc": s.initial_soc,
             "component": s.component_ref}
            for s in model.storage_units
        ],
        "grid": {
            "connected": model.grid_connected,
            "import_limit_kw": None if math.isinf(model.grid_import_limit) else model.grid_import_limit,
            "export_limit_kw": model.grid_export_limit,
            "component": model.grid_tie,
        },
    }


def load_model(path: str | Path) -> SystemModel:
    """Read a system description JSON file (``json.JSONDecodeError`` propagates)."""
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def resource_components(model: SystemModel) -> frozenset[str]:
    """Components whose outage removes a bus-level supply resource."""
    refs = {g.component_ref for g in model.generators} | {s.component_ref for s in model.storage_units}
    if model.grid_tie is not None:
        refs.add(model.grid_tie)
    refs.discard(None)
    return frozenset(refs)


def three_bus_example() -> SystemModel:
    """Small grid-connected microgrid used in tests, demos and the CLI docs.

    A grid tie feeds a main bus; two lines and a transformer serve three load
    points, one of which has a second path through a tie line.
    """
    comps = (
        Component("GT", ComponentKind.GRID_TIE, 0.5, 8760 / 4),
        Component("L1", ComponentKind.LINE, 0.2, 8760 / 5),
        Component("L2", ComponentKind.LINE, 0.3, 8760 / 8),
        Component("L3", ComponentKind.LINE, 0.1, 8760 / 6),
        Component("T1", ComponentKind.TRANSFORMER, 0.05, 8760 / 24),
        Component("INV_PV", ComponentKind.INVERTER, 0.4, 8760 / 48),
        Component("BESS", ComponentKind.STORAGE, 0.2, 8760 / 72),
        Component("DG", ComponentKind.DISPATCHABLE, 1.0, 8760 / 12),
    )
    res = (0.6,) * 7 + (0.8, 1.0, 1.1, 1.2, 1.1, 1.0, 1.0, 1.0, 1.0, 1.0, 1.1, 1.3, 1.4, 1.3, 1.1, 0.9) + (0.7,)
    lps = (
        LoadPoint("LP1", 10, 20.0, (frozenset({"L1"}),), res, priority=Priority.CRITICAL),
        LoadPoint("LP2", 60, 40.0, (frozenset({"L2", "T1"}),), res, priority=Priority.ESSENTIAL),
        LoadPoint("LP3", 120, 50.0, (frozenset({"L2"}), frozenset({"L3"})), res, priority=Priority.NON_CRITICAL),
    )
    gens = (
        GeneratorUnit("PV1", "pv", 80.0, "INV_PV"),
        GeneratorUnit("DG1", "dispatchable", 40.0, "DG", marginal_cost=0.35),
    )
    stor = (StorageUnit("B1", 200.0, 50.0, 0.95, 0.95, 0.1, 0.95, 0.5, "BESS"),)
    return SystemModel(comps, lps, gens, stor, grid_connected=True, grid_import_limit=150.0, grid_tie="GT")
