"""Chronological demand/renewable scenarios and renewable-drought analysis.

Scarcity events are maximal runs of a combined capacity factor below a
threshold. Their tail duration (nearest-rank percentile) is the minimum
storage discharge duration hint used by the planner. Regime models cluster
historical days on their daily means and resample multi-day chronologies
from the empirical day-to-day transition counts.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.cluster.vq import kmeans2

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("timestamp", "load_multiplier", "pv_cf", "wind_cf")
DEFAULT_START = datetime(2001, 1, 1)


class ScenarioError(ValueError):
    pass


class InputFormatError(ScenarioError):
    """Parse failure with a location inside an input file."""

    def __init__(self, message: str, file: str | None = None, line: int | None = None, column: str | int | None = None):
        super().__init__(message)
        self.file, self.line, self.column = file, line, column


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray
    step_hours: float = 1.0
    unit: str = "multiplier"  # "kW" | "capacity-factor" | "multiplier"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if not self.step_hours > 0:
            raise ScenarioError("step_hours must be positive")
        if self.unit == "capacity-factor" and vals.size and (vals.min() < 0 or vals.max() > 1):
            raise ScenarioError("capacity factors must lie in [0, 1]")

    def __len__(self) -> int:
        return self.values.size


def cf_series(values, step_hours: float = 1.0) -> TimeSeries:
    return TimeSeries(values, step_hours, "capacity-factor")


@dataclass(frozen=True)
class Scenario:
    id: str
    load_series: TimeSeries
    pv_cf_series: TimeSeries
    wind_cf_series: TimeSeries
    probability: float = 1.0
    start: datetime = DEFAULT_START

    def __post_init__(self):
        n = len(self.load_series)
        steps = {self.load_series.step_hours, self.pv_cf_series.step_hours, self.wind_cf_series.step_hours}
        if len(self.pv_cf_series) != n or len(self.wind_cf_series) != n or len(steps) != 1:
            raise ScenarioError(f"scenario {self.id!r}: series must share length and step")
        if not (0 < self.probability <= 1):
            raise ScenarioError(f"scenario {self.id!r}: probability must lie in (0, 1]")

    @property
    def horizon_steps(self) -> int:
        return len(self.load_series)

    @property
    def step_hours(self) -> float:
        return self.load_series.step_hours

    def hour_month(self) -> tuple[np.ndarray, np.ndarray]:
        """Hour-of-day (0-23) and month (0-11) of each step."""
        start = np.datetime64(self.start, "m")
        minutes = np.round(np.arange(self.horizon_steps) * self.step_hours * 60).astype("timedelta64[m]")
        stamps = start + minutes
        hour = (stamps.astype("datetime64[h]").astype(np.int64) % 24).astype(int)
        month = (stamps.astype("datetime64[M]").astype(np.int64) % 12).astype(int)
        return hour, month


def constant_scenario(hours: int, load_multiplier: float = 1.0, pv_cf: float = 0.0, wind_cf: float = 0.0,
                      sid: str = "flat", step_hours: float = 1.0) -> Scenario:
    n = int(round(hours / step_hours))
    return Scenario(
        sid,
        TimeSeries(np.full(n, load_multiplier), step_hours),
        cf_series(np.full(n, pv_cf), step_hours),
        cf_series(np.full(n, wind_cf), step_hours),
    )


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[Scenario, ...]

    def __post_init__(self):
        if not self.scenarios:
            raise ScenarioError("empty scenario set")
        total = sum(s.probability for s in self.scenarios)
        if abs(total - 1.0) > 1e-9:
            raise ScenarioError(f"scenario probabilities sum to {total}, not 1")
        if len({s.horizon_steps for s in self.scenarios}) != 1 or len({s.step_hours for s in self.scenarios}) != 1:
            raise ScenarioError("mismatched horizons across scenarios")
        if len({s.id for s in self.scenarios}) != len(self.scenarios):
            raise ScenarioError("duplicate scenario ids")

    @property
    def horizon_steps(self) -> int:
        return self.scenarios[0].horizon_steps

    @property
    def step_hours(self) -> float:
        return self.scenarios[0].step_hours

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([s.probability for s in self.scenarios])

    def __iter__(self):
        return iter(self.scenarios)

    def __len__(self):
        return len(self.scenarios)


def assemble(scenarios: Sequence[Scenario], weights: Sequence[float] | None = None) -> ScenarioSet:
    """Normalize weights into probabilities; equal weights by default."""
    scenarios = list(scenarios)
    if not scenarios:
        raise ScenarioError("no scenarios to assemble")
    w = np.ones(len(scenarios)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (len(scenarios),):
        raise ScenarioError("one weight per scenario required")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ScenarioError("weights must be positive and finite")
    if len({s.horizon_steps for s in scenarios}) != 1 or len({s.step_hours for s in scenarios}) != 1:
        raise ScenarioError("mismatched horizons across scenarios")
    p = w / w.sum()
    # push the rounding residue into the largest weight so the sum is exact-ish
    p[np.argmax(p)] += 1.0 - p.sum()
    return ScenarioSet(tuple(_with_probability(s, float(pi)) for s, pi in zip(scenarios, p)))


def _with_probability(s: Scenario, p: float) -> Scenario:
    return Scenario(s.id, s.load_series, s.pv_cf_series, s.wind_cf_series, p, s.start)


# ------------------------------------------------------------------ scarcity


@dataclass(frozen=True)
class ScarcityEvent:
    start_step: int
    duration_hours: float
    min_cf: float

    def __post_init__(self):
        if not self.duration_hours > 0:
            raise ScenarioError("scarcity event duration must be positive")


def combined_cf(pv_cf, wind_cf, pv_kw: float, wind_kw: float) -> np.ndarray | None:
    """Capacity-weighted mean of pv and wind capacity factors.

    Returns None when there is no variable renewable capacity at all.
    """
    total = pv_kw + wind_kw
    if total <= 0:
        return None
    pv = np.asarray(getattr(pv_cf, "values", pv_cf), dtype=float)
    wind = np.asarray(getattr(wind_cf, "values", wind_cf), dtype=float)
    return (pv_kw * pv + wind_kw * wind) / total


def detect_scarcity(series: TimeSeries, threshold: float) -> list[ScarcityEvent]:
    """Maximal runs of consecutive steps with value strictly below ``threshold``."""
    if not (0 < threshold < 1):
        raise ScenarioError("threshold must lie in (0, 1)")
    x = np.asarray(series.values, dtype=float)
    if x.size == 0:
        return []
    below = np.concatenate(([False], x < threshold, [False]))
    edges = np.flatnonzero(np.diff(below.astype(np.int8)))
    starts, stops = edges[::2], edges[1::2]
    return [
        ScarcityEvent(int(a), float((b - a) * series.step_hours), float(x[a:b].min()))
        for a, b in zip(starts, stops)
    ]


def nearest_rank(values: Sequence[float], p: float) -> float:
    xs = sorted(values)
    if not xs:
        raise ScenarioError("no values")
    if not (0 < p <= 1):
        raise ScenarioError("percentile must lie in (0, 1]")
    rank = max(1, math.ceil(p * len(xs) - 1e-12))
    return float(xs[rank - 1])


def scarcity_percentile(events: Sequence[ScarcityEvent], p: float) -> float:
    """Nearest-rank ``p``-quantile of event durations (hours)."""
    if not events:
        raise ScenarioError("no scarcity events")
    return nearest_rank([e.duration_hours for e in events], p)


# ------------------------------------------------------------------- regimes


@dataclass(frozen=True)
class RegimeModel:
    regime_count: int
    day_labels: np.ndarray
    transition_counts: np.ndarray
    regime_day_pools: tuple[np.ndarray, ...]  # each (days_in_regime, steps_per_day, 3)
    centroids: np.ndarray
    step_hours: float = 1.0

    def transition_matrix(self) -> np.ndarray:
        """Row-normalized counts; rows never left fall back to label frequencies."""
        counts = self.transition_counts.astype(float)
        freq = np.bincount(self.day_labels, minlength=self.regime_count).astype(float)
        freq /= freq.sum()
        out = np.empty_like(counts)
        for i, row in enumerate(counts):
            s = row.sum()
            out[i] = row / s if s > 0 else freq
        return out

    def stationary(self) -> np.ndarray:
        P = self.transition_matrix()
        w, v = np.linalg.eig(P.T)
        k = int(np.argmin(np.abs(w - 1.0)))
        pi = np.real(v[:, k])
        return pi / pi.sum()


def daily_features(days: np.ndarray) -> np.ndarray:
    """(n_days, 3) array of daily means: pv cf, wind cf, load multiplier."""
    days = np.asarray(days, dtype=float)
    m = days.mean(axis=1)  # columns: load, pv, wind
    return m[:, [1, 2, 0]]


def fit_regimes(daily_profiles: np.ndarray, regime_count: int, seed: int = 0, sweeps: int = 100,
                step_hours: float = 1.0) -> RegimeModel:
    """Cluster historical days into weather regimes.

    ``daily_profiles`` has shape (n_days, steps_per_day, 3) with columns
    (load_multiplier, pv_cf, wind_cf) in chronological day order.
    """
    days = np.asarray(daily_profiles, dtype=float)
    if days.ndim != 3 or days.shape[2] != 3:
        raise ScenarioError("daily profiles must have shape (days, steps_per_day, 3)")
    if regime_count < 2:
        raise ScenarioError("regime_count must be >= 2")
    feats = daily_features(days)
    if len(np.unique(feats, axis=0)) < regime_count:
        raise ScenarioError(f"need at least {regime_count} distinct days, got {len(np.unique(feats, axis=0))}")
    scale = feats.std(axis=0)
    scale[scale == 0] = 1.0
    z = feats / scale
    rng = np.random.default_rng(seed)
    centroids, labels = kmeans2(z, regime_count, iter=sweeps, minit="++", seed=rng, missing="warn")
    labels = labels.astype(int)
    counts = np.zeros((regime_count, regime_count), dtype=int)
    np.add.at(counts, (labels[:-1], labels[1:]), 1)
    pools = tuple(days[labels == k] for k in range(regime_count))
    return RegimeModel(regime_count, labels, counts, pools, centroids * scale, step_hours)


def _draw(model: RegimeModel, horizon_days: int, seed: int) -> tuple[np.ndarray, list[np.ndarray]]:
    if horizon_days < 1:
        raise ScenarioError("horizon_days must be >= 1")
    rng = np.random.default_rng(seed)
    P = model.transition_matrix()
    freq = np.bincount(model.day_labels, minlength=model.regime_count) / model.day_labels.size
    regimes = np.empty(horizon_days, dtype=int)
    picked = []
    regime = int(rng.choice(model.regime_count, p=freq))
    for d in range(horizon_days):
        if d:
            regime = int(rng.choice(model.regime_count, p=P[regime]))
        pool = model.regime_day_pools[regime]
        if len(pool) == 0:
            raise ScenarioError(f"regime {regime} has an empty day pool")
        regimes[d] = regime
        picked.append(pool[rng.integers(len(pool))])
    return regimes, picked


def sample_chronology(model: RegimeModel, horizon_days: int, seed: int, sid: str | None = None,
                      start: datetime = DEFAULT_START) -> Scenario:
    """Draw a regime path from the empirical chain and splice historical days."""
    _, picked = _draw(model, horizon_days, seed)
    block = np.concatenate(picked, axis=0)
    return Scenario(
        sid or f"regime-s{seed}",
        TimeSeries(block[:, 0], model.step_hours),
        cf_series(block[:, 1], model.step_hours),
        cf_series(block[:, 2], model.step_hours),
        start=start,
    )


def sample_regime_path(model: RegimeModel, horizon_days: int, seed: int) -> np.ndarray:
    """Regime labels of the days :func:`sample_chronology` draws for ``seed``."""
    return _draw(model, horizon_days, seed)[0]


# ----------------------------------------------------------------- history io


@dataclass
class History:
    timestamps: list[datetime]
    load_multiplier: np.ndarray
    pv_cf: np.ndarray
    wind_cf: np.ndarray
    source: str | None = None
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.timestamps)

    def to_scenario(self, sid: str | None = None) -> Scenario:
        return Scenario(
            sid or (Path(self.source).stem if self.source else "history"),
            TimeSeries(self.load_multiplier, 1.0),
            cf_series(self.pv_cf),
            cf_series(self.wind_cf),
            start=self.timestamps[0] if self.timestamps else DEFAULT_START,
        )

    def daily_profiles(self) -> np.ndarray:
        """Whole days from the first midnight onwards, shape (days, 24, 3)."""
        first = next((i for i, t in enumerate(self.timestamps) if t.hour == 0), None)
        if first is None:
            raise ScenarioError("history contains no complete day")
        block = np.column_stack([self.load_multiplier, self.pv_cf, self.wind_cf])[first:]
        n_days = block.shape[0] // 24
        if n_days == 0:
            raise ScenarioError("history contains no complete day")
        return block[: n_days * 24].reshape(n_days, 24, 3)


def read_history_csv(path: str | Path) -> History:
    """Hourly ``timestamp,load_multiplier,pv_cf,wind_cf`` rows; gaps are rejected."""
    path = str(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputFormatError("empty file", path, 1) from None
        for col in HISTORY_COLUMNS:
            if col not in header:
                raise InputFormatError(f"missing column {col!r}", path, 1, col)
        idx = {c: header.index(c) for c in HISTORY_COLUMNS}
        stamps: list[datetime] = []
        cols: dict[str, list[float]] = {c: [] for c in HISTORY_COLUMNS[1:]}
        for row in reader:
            line = reader.line_num
            if not row or all(not x.strip() for x in row):
                continue
            try:
                ts = datetime.fromisoformat(row[idx["timestamp"]].strip())
            except (ValueError, IndexError):
                raise InputFormatError("bad ISO-8601 timestamp", path, line, "timestamp") from None
            if ts.tzinfo is not None:
                ts = ts.replace(tzinfo=None)
            if stamps and ts != stamps[-1] + timedelta(hours=1):
                missing = stamps[-1] + timedelta(hours=1)
                raise InputFormatError(f"gap in hourly series: first missing timestamp {missing.isoformat()}",
                                       path, line, "timestamp")
            stamps.append(ts)
            for c in cols:
                try:
                    val = float(row[idx[c]])
                except (ValueError, IndexError):
                    raise InputFormatError(f"non-numeric value in {c!r}", path, line, c) from None
                if c != "load_multiplier" and not (0.0 <= val <= 1.0):
                    raise InputFormatError(f"capacity factor outside [0, 1] in {c!r}", path, line, c)
                if c == "load_multiplier" and val < 0:
                    raise InputFormatError("negative load multiplier", path, line, c)
                cols[c].append(val)
    if not stamps:
        raise InputFormatError("no data rows", path, 2)
    if len(stamps) < 2 * 8760:
        log.warning("%s covers %d h (< 2 years); tail scarcity statistics may be under-represented",
                    path, len(stamps))
    return History(stamps, np.array(cols["load_multiplier"]), np.array(cols["pv_cf"]),
                   np.array(cols["wind_cf"]), path)


def write_history_csv(path: str | Path, scenario: Scenario) -> None:
    start = scenario.start
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_COLUMNS)
        for t in range(scenario.horizon_steps):
            ts = start + timedelta(hours=t * scenario.step_hours)
            w.writerow([ts.isoformat(), repr(float(scenario.load_series.values[t])),
                        repr(float(scenario.pv_cf_series.values[t])), repr(float(scenario.wind_cf_series.values[t]))])


def synthetic_history(days: int, seed: int = 0, start: datetime = DEFAULT_START,
                      lulls: Sequence[tuple[int, int]] = ()) -> History:
    """Hourly toy weather and demand for demos and tests.

    PV follows a clipped daily sine with cloudiness drawn per day, wind is an
    AR(1) process squashed into [0, 1], and load has a morning and evening
    peak. Each ``(start_hour, hours)`` pair in ``lulls`` plants a stretch of
    near-zero wind and heavy cloud.
    """
    rng = np.random.default_rng(seed)
    T = days * 24
    hour = np.arange(T) % 24
    cloud = np.repeat(rng.uniform(0.3, 1.0, days), 24)
    pv = np.clip(np.sin((hour - 6) / 12 * np.pi), 0, None) * cloud
    z = np.empty(T)
    z[0] = 0.0
    shocks = rng.normal(0.0, 0.25, T)
    for t in range(1, T):
        z[t] = 0.97 * z[t - 1] + shocks[t]
    wind = 1.0 / (1.0 + np.exp(-(z - 0.2)))
    load = 0.75 + 0.15 * np.exp(-((hour - 8) ** 2) / 6) + 0.25 * np.exp(-((hour - 19) ** 2) / 8)
    load = load * rng.normal(1.0, 0.03, T)
    for s, n in lulls:
        sl = slice(s, min(T, s + n))
        wind[sl] = rng.uniform(0.0, 0.05, wind[sl].size)
        pv[sl] *= 0.1
    stamps = [start + timedelta(hours=t) for t in range(T)]
    return History(stamps, np.clip(load, 0, None), np.clip(pv, 0, 1), np.clip(wind, 0, 1), None)
