"""Monte Carlo reliability evaluation.

Sequential mode walks a failure/repair event queue per iteration: every
component starts with an exponential time to failure, the earliest event is
processed next, failures draw a time to repair and restorations redraw a
time to failure. Overlapping outages merge into episodes; inside an episode
the availability state is piecewise constant and each piece is checked
against the supply paths. When an episode takes out a supply resource (a
generator, storage unit or the grid tie) the bus is re-dispatched over the
episode so local generation and storage serve what they can; the unserved
energy recorded is the excess over the all-available baseline dispatch.

Non-sequential mode samples independent component states from the steady
state unavailability lambda / (lambda + mu) and has no chronology.

Iteration ``n`` draws from its own generator seeded with ``(seed, n)``, so
results do not depend on how iterations are spread across threads.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dispatch import (
    SHED_TOL,
    DispatchPolicy,
    Engine,
    lp_load_matrix,
    lp_tiers,
    run as run_dispatch,
)
from .scenario_engine import InputFormatError, Scenario, ScenarioSet
from .system_model import HOURS_PER_YEAR, SystemModel, resource_components

Z95 = 1.959963984540054


class McsError(ValueError):
    pass


@dataclass(frozen=True)
class McsConfig:
    iterations: int = 1000
    horizon_years: float = 1.0
    seed: int = 0
    mode: str = "sequential"  # | "nonsequential"
    convergence: str = "fixed"  # | "cov"
    cov_epsilon: float = 0.05
    check_every: int = 1000
    max_iterations: int = 100_000
    momentary_threshold_h: float = 5.0 / 60.0
    threads: int = 1

    def check(self) -> None:
        if self.iterations < 1:
            raise McsError("iterations must be >= 1")
        if not self.horizon_years > 0:
            raise McsError("horizon_years must be positive")
        if self.mode not in ("sequential", "nonsequential"):
            raise McsError(f"unknown mode {self.mode!r}")
        if self.convergence not in ("fixed", "cov"):
            raise McsError(f"unknown convergence rule {self.convergence!r}")
        if self.convergence == "cov" and not (0 < self.cov_epsilon < 1 and self.check_every >= 1):
            raise McsError("cov convergence needs 0 < cov_epsilon < 1 and check_every >= 1")
        if self.momentary_threshold_h < 1.0 / 60.0 - 1e-12:
            raise McsError("momentary threshold cannot be below one minute")
        if self.threads < 1:
            raise McsError("threads must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise McsError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_dict(cls, d: Mapping) -> "McsConfig":
        return cls(**dict(d))


@dataclass(frozen=True)
class OutageEvent:
    component: str
    t_fail: float  # hours from horizon start
    t_restore: float
    affected_load_points: tuple[str, ...]
    unserved_energy: float  # kWh
    momentary: bool


@dataclass(frozen=True)
class Interruption:
    """Continuous loss of supply at one load point."""

    load_point: str
    start: float
    end: float
    unserved_energy: float
    cause: str

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class OutageLog:
    iteration: int
    scenario_id: str
    horizon_hours: float
    events: tuple[OutageEvent, ...]
    interruptions: tuple[Interruption, ...] = ()


@dataclass
class McsEstimate:
    mode: str
    iterations: int
    horizon_years: float
    lp_ids: tuple[str, ...]
    lambda_i: np.ndarray  # interruptions / year
    u_i: np.ndarray  # hours / year
    m_i: np.ndarray  # momentary interruptions / year
    eens: float  # kWh / year
    lol_hours: float  # hours / year with any component-induced loss of supply
    lambda_hw: np.ndarray
    u_hw: np.ndarray
    eens_hw: float
    lol_hw: float
    converged: bool | None = None
    unavailability: np.ndarray | None = None
    notes: tuple[str, ...] = ()

    @property
    def r_i(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.lambda_i > 0, self.u_i / np.where(self.lambda_i > 0, self.lambda_i, 1.0), np.nan)

    @property
    def chronology(self) -> str:
        return "sequential" if self.mode == "sequential" else "none"

    def load_point(self, lp_id: str) -> dict:
        j = self.lp_ids.index(lp_id)
        r = self.r_i[j]
        return {"lambda": float(self.lambda_i[j]), "U": float(self.u_i[j]),
                "r": None if math.isnan(r) else float(r), "M": float(self.m_i[j])}

    def to_dict(self) -> dict:
        r = self.r_i
        lps = {}
        for j, lp in enumerate(self.lp_ids):
            entry = {
                "lambda_per_yr": {"value": float(self.lambda_i[j]), "ci95_half_width": float(self.lambda_hw[j])},
                "U_h_per_yr": {"value": float(self.u_i[j]), "ci95_half_width": float(self.u_hw[j])},
                "r_h": None if math.isnan(r[j]) else float(r[j]),
                "momentary_per_yr": float(self.m_i[j]),
            }
            if self.unavailability is not None:
                entry["unavailability"] = float(self.unavailability[j])
            lps[lp] = entry
        return {
            "mode": self.mode,
            "chronology": self.chronology,
            "iterations": self.iterations,
            "horizon_years": self.horizon_years,
            "converged": self.converged,
            "confidence_level": 0.95,
            "load_points": lps,
            "eens_kwh_per_yr": {"value": self.eens, "ci95_half_width": self.eens_hw},
            "loss_of_supply_h_per_yr": {"value": self.lol_hours, "ci95_half_width": self.lol_hw},
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------- primitives


def _check_draw(rate, x, name: str):
    rate_a = np.asarray(rate, dtype=float)
    x_a = np.asarray(x, dtype=float)
    if np.any(rate_a <= 0):
        raise McsError(f"{name} must be positive")
    if np.any(x_a <= 0) or np.any(x_a > 1):
        raise McsError("uniform draw must lie in (0, 1]")
    return rate_a, x_a


def draw_ttf(lam, x):
    """Time to failure in years: -ln(x) / lambda."""
    lam_a, x_a = _check_draw(lam, x, "failure rate")
    out = -np.log(x_a) / lam_a
    return float(out) if out.ndim == 0 else out


def draw_ttr(mu, x):
    """Time to repair in years: -ln(x) / mu."""
    mu_a, x_a = _check_draw(mu, x, "repair rate")
    out = -np.log(x_a) / mu_a
    return float(out) if out.ndim == 0 else out


def uniform_open_closed(rng: np.random.Generator, size=None):
    """Uniform on (0, 1]; a zero can never come out."""
    return 1.0 - rng.random(size)


def load_at(w_h: float, w_m: float, peak: float) -> float:
    if w_h < 0 or w_m < 0:
        raise McsError("load weights must be non-negative")
    return w_h * w_m * peak


# ---------------------------------------------------------------- sequential


@dataclass
class _ScenarioPrep:
    scenario: Scenario
    T: int
    dt: float
    lp_load: np.ndarray  # (T, n_lp)
    cum: np.ndarray  # (T + 1, n_lp)
    base_soc_start: np.ndarray  # (T, n_storage)
    base_unserved: np.ndarray  # (T, n_lp), kW
    reserve: np.ndarray
    pv: np.ndarray
    wind: np.ndarray


@dataclass
class _IterResult:
    log: OutageLog
    sustained: np.ndarray
    momentary: np.ndarray
    hours: np.ndarray
    unserved: float
    lol: float


class SequentialSimulator:
    def __init__(self, model: SystemModel, scenario_set: ScenarioSet, policy: DispatchPolicy | None,
                 config: McsConfig):
        config.check()
        self.model = model
        self.config = config
        self.policy = policy or DispatchPolicy()
        self.engine = Engine(model, self.policy)
        self.comps = sorted(model.components, key=lambda c: c.id)  # id order breaks ties
        self.cid = [c.id for c in self.comps]
        self.bit = {c: 1 << i for i, c in enumerate(self.cid)}
        self.paths = [
            [sum(self.bit[c] for c in p) for p in lp.supply_paths if p] for lp in model.load_points
        ]
        self.res_mask = sum(self.bit[c] for c in resource_components(model) if c in self.bit)
        self.lp_ids = tuple(lp.id for lp in model.load_points)
        self.tiers = lp_tiers(model)
        self.horizon_h = config.horizon_years * HOURS_PER_YEAR
        self.scenarios = scenario_set
        self.probs = scenario_set.probabilities
        self.preps = [self._prepare(s) for s in scenario_set]
        self._disc_cache: dict[int, tuple[bool, ...]] = {}
        self._down_cache: dict[int, frozenset[str]] = {}

    def _prepare(self, sc: Scenario) -> _ScenarioPrep:
        lp_load = lp_load_matrix(self.model, sc)
        T, dt = sc.horizon_steps, sc.step_hours
        cum = np.vstack([np.zeros((1, lp_load.shape[1])), np.cumsum(lp_load * dt, axis=0)])
        if self.res_mask:
            base = run_dispatch(self.model, sc, self.policy)
            soc0 = np.array(self.engine.initial_soc()).reshape(1, -1)
            soc_start = np.vstack([soc0, base.soc[:-1]]) if T > 1 else soc0
            base_unserved = base.unserved_by_lp
        else:
            soc_start = np.zeros((T, 0))
            base_unserved = np.zeros_like(lp_load)
        return _ScenarioPrep(sc, T, dt, lp_load, cum, soc_start, base_unserved,
                             self.engine.reserve_flags(sc), sc.pv_cf_series.values, sc.wind_cf_series.values)

    # -- structure helpers ------------------------------------------------

    def disconnected(self, down_mask: int) -> tuple[bool, ...]:
        hit = self._disc_cache.get(down_mask)
        if hit is None:
            hit = tuple(all(pm & down_mask for pm in paths) for paths in self.paths)
            self._disc_cache[down_mask] = hit
        return hit

    def down_ids(self, down_mask: int) -> frozenset[str]:
        hit = self._down_cache.get(down_mask)
        if hit is None:
            hit = frozenset(c for c in self.cid if self.bit[c] & down_mask)
            self._down_cache[down_mask] = hit
        return hit

    def energy(self, prep: _ScenarioPrep, a: float, b: float) -> np.ndarray:
        """Per-load-point energy (kWh) over [a, b) hours, scenario wrapping."""
        return self._cum_at(prep, b) - self._cum_at(prep, a)

    @staticmethod
    def _cum_at(prep: _ScenarioPrep, h: float) -> np.ndarray:
        period = prep.T * prep.dt
        cycles, r = divmod(h, period)
        k = min(int(r // prep.dt), prep.T - 1)
        return cycles * prep.cum[-1] + prep.cum[k] + (r - k * prep.dt) * prep.lp_load[k]

    # -- one iteration ------------------------------------------------------

    def iteration(self, n: int) -> _IterResult:
        rng = np.random.default_rng([self.config.seed, n])
        s_idx = int(rng.choice(len(self.probs), p=self.probs)) if len(self.probs) > 1 else 0
        prep = self.preps[s_idx]
        outages = self._timeline(rng)
        n_lp = len(self.lp_ids)
        interruptions: list[Interruption] = []
        lol = 0.0
        i = 0
        while i < len(outages):
            end = outages[i][2]
            j = i + 1
            while j < len(outages) and outages[j][1] < end:
                end = max(end, outages[j][2])
                j += 1
            ints, lol_ep = self._episode(prep, outages, i, j)
            interruptions.extend(ints)
            lol += lol_ep
            i = j

        thr = self.config.momentary_threshold_h
        sustained = np.zeros(n_lp)
        momentary = np.zeros(n_lp)
        hours = np.zeros(n_lp)
        pos = {lp: j for j, lp in enumerate(self.lp_ids)}
        for it in interruptions:
            j = pos[it.load_point]
            if it.duration < thr:
                momentary[j] += 1
            else:
                sustained[j] += 1
                hours[j] += it.duration
        events = []
        for k, (ci, tf, tr) in enumerate(outages):
            mine = [it for it in interruptions if it.cause == f"{self.cid[ci]}@{k}"]
            events.append(OutageEvent(
                self.cid[ci], tf, tr,
                tuple(sorted({it.load_point for it in mine}, key=pos.get)),
                float(sum(it.unserved_energy for it in mine)),
                (tr - tf) < thr,
            ))
        # public cause field carries the component id only
        interruptions = [Interruption(it.load_point, it.start, it.end, it.unserved_energy, it.cause.split("@")[0])
                         for it in interruptions]
        total = float(sum(it.unserved_energy for it in interruptions))
        log = OutageLog(n, prep.scenario.id, self.horizon_h, tuple(events), tuple(interruptions))
        return _IterResult(log, sustained, momentary, hours, total, lol)

    def _timeline(self, rng: np.random.Generator) -> list[tuple[int, float, float]]:
        """(component index, t_fail h, t_restore h) for failures inside the horizon."""
        H = self.horizon_h
        n = len(self.comps)
        nxt = [math.inf] * n
        up = [True] * n
        for i, c in enumerate(self.comps):
            nxt[i] = self._next_failure(c, 0.0, rng)
        outages = []
        while True:
            t = min(nxt)
            if t >= H:
                break
            i = nxt.index(t)  # first minimum = lowest id
            c = self.comps[i]
            if up[i]:
                ttr = -math.log(1.0 - rng.random()) / c.repair_rate * HOURS_PER_YEAR
                outages.append((i, t, t + ttr))
                up[i] = False
                nxt[i] = t + ttr
            else:
                up[i] = True
                nxt[i] = self._next_failure(c, t, rng)
        outages.sort(key=lambda o: (o[1], o[0]))
        return outages

    def _next_failure(self, c, t: float, rng) -> float:
        year = t / HOURS_PER_YEAR
        rate = c.rate_at(year)
        if rate > 0:
            return t - math.log(1.0 - rng.random()) / rate * HOURS_PER_YEAR
        if isinstance(c.failure_rate, tuple):
            # zero-rate segment: wait for the next segment with a positive rate
            for seg in c.failure_rate:
                if seg.start_year > year and seg.rate > 0:
                    return self._next_failure(c, seg.start_year * HOURS_PER_YEAR, rng)
        return math.inf

    def _episode(self, prep: _ScenarioPrep, outages, i: int, j: int) -> tuple[list[Interruption], float]:
        group = list(range(i, j))
        marks = sorted({outages[k][1] for k in group} | {outages[k][2] for k in group})
        union = 0
        for k in group:
            union |= self.bit[self.cid[outages[k][0]]]
        redispatch = bool(union & self.res_mask)
        n_lp = len(self.lp_ids)
        open_start = [None] * n_lp
        open_cause = [None] * n_lp
        open_energy = [0.0] * n_lp
        out: list[Interruption] = []
        lol = 0.0
        soc = None

        def close(jj: int, t_end: float):
            out.append(Interruption(self.lp_ids[jj], open_start[jj], t_end, open_energy[jj], open_cause[jj]))
            open_start[jj] = None
            open_energy[jj] = 0.0

        for a, b in zip(marks, marks[1:]):
            if b <= a:
                continue
            down = 0
            latest, cause = -1.0, None
            for k in group:
                ci, tf, tr = outages[k]
                if tf <= a and tr >= b:
                    down |= self.bit[self.cid[ci]]
                    if tf > latest or (tf == latest and (cause is None or k > int(cause.split("@")[1]))):
                        latest, cause = tf, f"{self.cid[ci]}@{k}"
            pieces = self._pieces(prep, a, b) if redispatch else [(a, b)]
            disc = self.disconnected(down)
            for pa, pb in pieces:
                if redispatch:
                    if soc is None:
                        k0 = int(pa // prep.dt) % prep.T
                        soc = list(prep.base_soc_start[k0])
                    hit, energy = self._redispatch(prep, pa, pb, down, disc, soc)
                else:
                    hit = disc
                    energy = self.energy(prep, pa, pb) if any(disc) else None
                any_hit = False
                for jj in range(n_lp):
                    if hit[jj]:
                        any_hit = True
                        if open_start[jj] is None:
                            open_start[jj], open_cause[jj] = pa, cause
                        open_energy[jj] += float(energy[jj])
                    elif open_start[jj] is not None:
                        close(jj, pa)
                if any_hit:
                    lol += pb - pa
        for jj in range(n_lp):
            if open_start[jj] is not None:
                close(jj, marks[-1])
        out.sort(key=lambda it: (it.start, self.lp_ids.index(it.load_point)))
        return out, lol

    @staticmethod
    def _pieces(prep: _ScenarioPrep, a: float, b: float) -> list[tuple[float, float]]:
        dt = prep.dt
        out = []
        t = a
        while t < b:
            nxt = min(b, (math.floor(t / dt + 1e-12) + 1) * dt)
            if nxt <= t:
                nxt = min(b, t + dt)
            out.append((t, nxt))
            t = nxt
        return out

    def _redispatch(self, prep: _ScenarioPrep, a: float, b: float, down: int, disc, soc):
        d = b - a
        k = int(a // prep.dt) % prep.T
        load = prep.lp_load[k]
        conn = np.where(disc, 0.0, load)
        tier_load = [float(conn[self.tiers == t].sum()) for t in range(3)]
        r = self.engine.step(tier_load, float(prep.pv[k]), float(prep.wind[k]), self.down_ids(down), soc, d,
                             bool(prep.reserve[k]))
        shed = r[9]
        rate = np.zeros_like(load)
        for t in range(3):
            if tier_load[t] > 0 and shed[t] > 0:
                sel = (self.tiers == t) & ~np.asarray(disc)
                rate[sel] = conn[sel] * (shed[t] / tier_load[t])
        extra = np.maximum(0.0, rate - prep.base_unserved[k])
        hit = tuple(bool(disc[j] or extra[j] > SHED_TOL) for j in range(len(load)))
        energy = np.where(disc, load * d, extra * d)
        return hit, energy


def _blocks(config: McsConfig):
    if config.convergence == "fixed":
        yield 0, config.iterations
        return
    start = 0
    while start < config.max_iterations:
        stop = min(start + config.check_every, config.max_iterations)
        yield start, stop
        start = stop


def _map(fn, indices, threads: int):
    if threads <= 1:
        return [fn(i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, indices, chunksize=max(1, len(indices) // (4 * threads))))


def run_sequential(model: SystemModel, scenario_set: ScenarioSet, policy: DispatchPolicy | None,
                   config: McsConfig) -> tuple[list[OutageLog], McsEstimate]:
    """Sequential Monte Carlo over ``config.iterations`` horizons."""
    sim = SequentialSimulator(model, scenario_set, policy, config)
    results: list[_IterResult] = []
    converged = None
    for start, stop in _blocks(config):
        results.extend(_map(sim.iteration, range(start, stop), config.threads))
        if config.convergence == "cov":
            u = np.array([r.unserved for r in results])
            mean = u.mean()
            se = u.std(ddof=1) / math.sqrt(u.size) if u.size > 1 else math.inf
            converged = bool(mean > 0 and se / mean < config.cov_epsilon)
            if converged:
                break
    logs = [r.log for r in results]
    est = _aggregate(results, sim.lp_ids, config, converged)
    return logs, est


def _mean_hw(x: np.ndarray, scale: float):
    n = x.shape[0]
    mean = x.mean(axis=0) / scale
    sd = x.std(axis=0, ddof=1) if n > 1 else np.zeros_like(mean)
    return mean, Z95 * sd / math.sqrt(n) / scale


def _aggregate(results: list[_IterResult], lp_ids, config: McsConfig, converged) -> McsEstimate:
    T = config.horizon_years
    sus = np.array([r.sustained for r in results]).reshape(len(results), len(lp_ids))
    mom = np.array([r.momentary for r in results]).reshape(len(results), len(lp_ids))
    hrs = np.array([r.hours for r in results]).reshape(len(results), len(lp_ids))
    lam, lam_hw = _mean_hw(sus, T)
    u, u_hw = _mean_hw(hrs, T)
    m, _ = _mean_hw(mom, T)
    e, e_hw = _mean_hw(np.array([r.unserved for r in results]), T)
    l, l_hw = _mean_hw(np.array([r.lol for r in results]), T)
    return McsEstimate("sequential", len(results), T, tuple(lp_ids), lam, u, m, float(e), float(l),
                       lam_hw, u_hw, float(e_hw), float(l_hw), converged)


# ------------------------------------------------------------ nonsequential


def steady_state_unavailability(model: SystemModel, year: float = 0.0) -> dict[str, float]:
    out = {}
    for c in model.components:
        lam = c.rate_at(year)
        out[c.id] = lam / (lam + c.repair_rate) if lam > 0 else 0.0
    return out


def run_nonsequential(model: SystemModel, config: McsConfig,
                      snapshot_load_distribution: Mapping[str, Sequence[float]] | None = None,
                      chunk: int = 100_000) -> McsEstimate:
    """State sampling with independent components; ``iterations`` states.

    Interruption frequency uses the transition-rate estimator: a sampled
    down state contributes the repair rates of the components whose repair
    alone would re-energize the load point.
    """
    config.check()
    comps = sorted(model.components, key=lambda c: c.id)
    q = steady_state_unavailability(model)
    qv = np.array([q[c.id] for c in comps])
    mu = np.array([c.repair_rate for c in comps])
    pos = {c.id: i for i, c in enumerate(comps)}
    lps = model.load_points
    path_idx = [[np.array([pos[c] for c in p]) for p in lp.supply_paths if p] for lp in lps]
    if snapshot_load_distribution is None:
        mean_load = np.array([lp.peak_load * np.mean(lp.hourly_weights) * np.mean(lp.monthly_weights) for lp in lps])
        samples = None
    else:
        samples = [np.asarray(snapshot_load_distribution[lp.id], dtype=float) for lp in lps]
    rng = np.random.default_rng(config.seed)
    N = config.iterations
    n_lp = len(lps)
    disc_sum = np.zeros(n_lp)
    freq_sum = np.zeros(n_lp)
    freq_sq = np.zeros(n_lp)
    ens_total = []
    done = 0
    while done < N:
        m = min(chunk, N - done)
        down = rng.random((m, len(comps))) < qv
        ens = np.zeros(m)
        for j in range(n_lp):
            dj = _disc(down, path_idx[j])
            rate = np.zeros(m)
            if dj.any():
                for ci in np.unique(np.concatenate(path_idx[j])):
                    alt = down[dj].copy()
                    alt[:, ci] = False
                    restored = ~_disc(alt, path_idx[j])
                    rate[np.flatnonzero(dj)[restored]] += mu[ci]
            disc_sum[j] += dj.sum()
            freq_sum[j] += rate.sum()
            freq_sq[j] += (rate**2).sum()
            load = mean_load[j] if samples is None else samples[j][rng.integers(samples[j].size, size=m)]
            ens += dj * load * HOURS_PER_YEAR
        ens_total.append(ens)
        done += m
    p = disc_sum / N
    lam = freq_sum / N
    lam_sd = np.sqrt(np.maximum(freq_sq / N - lam**2, 0.0) * N / max(N - 1, 1))
    ens_all = np.concatenate(ens_total)
    lol_p = float(np.mean(ens_all > 0))
    u = p * HOURS_PER_YEAR
    u_hw = Z95 * np.sqrt(p * (1 - p) / N) * HOURS_PER_YEAR
    return McsEstimate(
        "nonsequential", N, config.horizon_years, tuple(lp.id for lp in lps),
        lam, u, np.zeros(n_lp), float(ens_all.mean()), lol_p * HOURS_PER_YEAR,
        Z95 * lam_sd / math.sqrt(N), u_hw,
        float(Z95 * ens_all.std(ddof=1) / math.sqrt(N)) if N > 1 else 0.0,
        float(Z95 * math.sqrt(lol_p * (1 - lol_p) / N) * HOURS_PER_YEAR), None, p,
        ("chronology: none", "storage state, repair sequences and momentary events are not captured"),
    )


def _disc(down: np.ndarray, paths: list[np.ndarray]) -> np.ndarray:
    out = np.ones(down.shape[0], dtype=bool)
    for p in paths:
        out &= down[:, p].any(axis=1)
    return out


# ---------------------------------------------------------------------- csv

OUTAGE_COLUMNS = ("iteration", "component", "t_fail_h", "t_restore_h", "unserved_kwh", "momentary")
INTERRUPTION_COLUMNS = ("iteration", "load_point", "start_h", "end_h", "unserved_kwh", "cause")


def write_outage_csv(path: str | Path, logs: Sequence[OutageLog]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(OUTAGE_COLUMNS)
        for log in logs:
            for e in log.events:
                w.writerow([log.iteration, e.component, repr(e.t_fail), repr(e.t_restore),
                            repr(e.unserved_energy), int(e.momentary)])


def write_interruptions_csv(path: str | Path, logs: Sequence[OutageLog]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(INTERRUPTION_COLUMNS)
        for log in logs:
            for it in log.interruptions:
                w.writerow([log.iteration, it.load_point, repr(it.start), repr(it.end),
                            repr(it.unserved_energy), it.cause])


def read_interruptions_csv(path: str | Path, iterations: int, horizon_hours: float) -> list[OutageLog]:
    """Rebuild per-iteration logs (interruptions only) from a CSV export."""
    path = str(path)
    per: dict[int, list[Interruption]] = {n: [] for n in range(iterations)}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in INTERRUPTION_COLUMNS:
            if col not in header:
                raise InputFormatError(f"missing column {col!r}", path, 1, col)
        for row in reader:
            try:
                n = int(row["iteration"])
                it = Interruption(row["load_point"], float(row["start_h"]), float(row["end_h"]),
                                  float(row["unserved_kwh"]), row["cause"])
            except (TypeError, ValueError):
                raise InputFormatError("malformed row", path, reader.line_num) from None
            if n not in per:
                raise InputFormatError(f"iteration {n} outside 0..{iterations - 1}", path, reader.line_num,
                                       "iteration")
            per[n].append(it)
    return [OutageLog(n, "", horizon_hours, (), tuple(per[n])) for n in range(iterations)]
