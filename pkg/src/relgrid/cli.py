"""Command-line entry point: ``relgrid <subcommand> ...``.

Every JSON payload has the shape ``{"manifest": ..., "result": ...}``.
Wall-clock and parallelism details live under ``manifest.runtime`` so that
everything else is byte-identical for identical inputs and seeds.

Exit codes: 0 success, 2 input error, 3 infeasible plan, 4 internal
invariant violation. Errors go to stderr as one line of JSON.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .dispatch import DispatchPolicy, read_trace_csv, run as run_dispatch
from .indices import (
    CONTEXTS,
    IndexReport,
    IndicesError,
    adequacy_deterministic,
    adequacy_probabilistic,
    advise,
    customer_indices,
    load_point_analytic,
)
from .mcs import (
    McsConfig,
    McsError,
    read_interruptions_csv,
    run_nonsequential,
    run_sequential,
    write_interruptions_csv,
    write_outage_csv,
)
from .planner import (
    CandidateGrid,
    CostModel,
    PlanError,
    ProtectionRules,
    ReliabilityTargets,
    search,
)
from .scenario_engine import (
    InputFormatError,
    ScenarioError,
    assemble,
    combined_cf,
    cf_series,
    constant_scenario,
    detect_scarcity,
    fit_regimes,
    read_history_csv,
    sample_chronology,
    scarcity_percentile,
    write_history_csv,
)
from .system_model import HOURS_PER_YEAR, ModelError, SystemModel, model_from_dict, validate

log = logging.getLogger("relgrid")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_INVARIANT = 0, 2, 3, 4
BALANCE_TOL = 1e-9


class InvariantViolation(RuntimeError):
    pass


class InputError(ValueError):
    def __init__(self, message: str, file: str | None = None, line: int | None = None, column=None):
        super().__init__(message)
        self.file, self.line, self.column = file, line, column


# ------------------------------------------------------------------ helpers


def _clean(o: Any) -> Any:
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats to None."""
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, np.generic):
        o = o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return None
    return o


def dumps(payload: Any) -> str:
    return json.dumps(_clean(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"


def digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def derive_seed(seed: int, *path: int) -> int:
    """Independent 64-bit sub-seed for a named subsystem."""
    return int(np.random.SeedSequence([seed, *path]).generate_state(1, np.uint64)[0])


def read_json(path: str | Path) -> Any:
    path = str(path)
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON: {exc.msg}", path, exc.lineno, exc.colno) from None
    except OSError as exc:
        raise InputError(f"cannot read file: {exc.strerror}", path) from None


def load_system(path: str | Path) -> SystemModel:
    doc = read_json(path)
    try:
        model = model_from_dict(doc)
    except ModelError as exc:
        raise InputError(str(exc), str(path)) from None
    report = validate(model)
    if not report.ok:
        raise InputError("invalid system model: " + "; ".join(report.violations), str(path))
    return model


def load_scenarios(paths: Sequence[str], weights: Sequence[float] | None):
    if weights is not None and len(weights) != len(paths):
        raise InputError("--weights needs one value per scenario file")
    scens = []
    for i, p in enumerate(paths):
        if not Path(p).exists():
            raise InputError("file not found", p)
        scens.append(read_history_csv(p).to_scenario(f"s{i}-{Path(p).stem}"))
    return assemble(scens, weights)


def load_policy(path: str | None) -> DispatchPolicy:
    if path is None:
        return DispatchPolicy()
    try:
        return DispatchPolicy.from_dict(read_json(path))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"invalid policy: {exc}", path) from None


class Run:
    """Collects manifest data and writes payloads into the output directory."""

    def __init__(self, args: argparse.Namespace, options: dict, inputs: Sequence[str]):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = {
            "tool": "relgrid",
            "version": __version__,
            "subcommand": args.command,
            "seed": getattr(args, "seed", None),
            "options": options,
            "inputs": {str(p): digest(p) for p in inputs if p is not None and Path(p).is_file()},
            "runtime": {
                "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                "threads": getattr(args, "threads", 1),
                "out": str(self.out),
            },
        }

    def write_json(self, name: str, result: Any) -> Path:
        path = self.out / name
        path.write_text(dumps({"manifest": self.manifest, "result": result}), encoding="utf-8")
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text, encoding="utf-8")
        return path


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    if getattr(args, "no_seed_ok", False):
        seed = int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
        args.seed = seed
        return seed
    raise InputError("--seed is required for reproducibility (pass --no-seed-ok to draw one)")


def _check_trace(trace) -> None:
    worst = float(np.max(np.abs(trace.balance_residual()))) if trace.horizon_steps else 0.0
    if worst >= BALANCE_TOL:
        raise InvariantViolation(f"energy balance residual {worst:.3e} kW in scenario {trace.scenario_id!r}")


# -------------------------------------------------------------- subcommands


def cmd_evaluate(args) -> int:
    model = load_system(args.system)
    ss = load_scenarios(args.scenarios, args.weights)
    policy = load_policy(args.policy)
    policy.check(model)
    run = Run(args, {"weights": args.weights, "policy": args.policy}, [args.system, *args.scenarios, args.policy])
    traces = {}
    for s in ss:
        trace = run_dispatch(model, s, policy)
        _check_trace(trace)
        traces[s.id] = trace
        trace.to_csv(run.out / f"trace_{s.id}.csv")
    report = IndexReport(probabilistic=adequacy_probabilistic(traces, ss), horizon_hours=ss.horizon_steps * ss.step_hours)
    first = next(iter(ss))
    report.deterministic = adequacy_deterministic(model, first)
    if all(lp.is_radial for lp in model.load_points):
        report.load_points = load_point_analytic(model)
    else:
        report.caveats.append("meshed load points: load-point indices need the mcs subcommand")
    result = report.to_dict()
    result["deterministic_by_scenario"] = {s.id: adequacy_deterministic(model, s).to_dict() for s in ss}
    result["scenarios"] = {s.id: float(p) for s, p in zip(ss, ss.probabilities)}
    run.write_json("index_report.json", result)
    run.write_text("index_report.csv", report.to_csv())
    print(f"wrote {len(traces)} trace(s) and index_report.json to {run.out}")
    return EXIT_OK


def _mcs_config(args, seed: int) -> McsConfig:
    base = {}
    if args.config:
        doc = read_json(args.config)
        if not isinstance(doc, dict):
            raise InputError("MCS config must be a JSON object", args.config)
        base.update(doc)
    for key in ("iterations", "horizon_years", "mode", "convergence", "cov_epsilon", "max_iterations"):
        val = getattr(args, key)
        if val is not None:
            base[key] = val
    base["seed"] = seed
    base["threads"] = args.threads
    base["momentary_threshold_h"] = args.momentary_threshold / 60.0
    try:
        cfg = McsConfig.from_dict(base)
    except TypeError as exc:
        raise InputError(f"invalid MCS config: {exc}", args.config) from None
    cfg.check()
    return cfg


def cmd_mcs(args) -> int:
    seed = _seed(args)
    model = load_system(args.system)
    cfg = _mcs_config(args, seed)
    policy = load_policy(args.policy)
    options = {k: v for k, v in cfg.__dict__.items() if k != "threads"}
    run = Run(args, options, [args.system, args.config, args.policy, *(args.scenarios or [])])
    if cfg.mode == "nonsequential":
        est = run_nonsequential(model, cfg)
        result = {"estimate": est.to_dict()}
    else:
        if args.scenarios:
            ss = load_scenarios(args.scenarios, args.weights)
        else:
            hours = int(round(cfg.horizon_years * HOURS_PER_YEAR))
            ss = assemble([constant_scenario(hours, 1.0, 0.0, 0.0, "flat")])
        logs, est = run_sequential(model, ss, policy, cfg)
        write_outage_csv(run.out / "outage_log.csv", logs)
        write_interruptions_csv(run.out / "interruptions.csv", logs)
        cust = customer_indices(logs, model, cfg.momentary_threshold_h, args.n_cemi)
        result = {"estimate": est.to_dict(), "customer": cust.to_dict()}
        if all(lp.is_radial for lp in model.load_points):
            result["analytic_load_points"] = load_point_analytic(model).to_dict()
    run.write_json("estimate.json", result)
    e = result["estimate"]
    print(f"{e['mode']} MCS: {e['iterations']} iterations, EENS {e['eens_kwh_per_yr']['value']:.3f} kWh/yr; "
          f"wrote {run.out}")
    return EXIT_OK


def cmd_indices(args) -> int:
    model = load_system(args.system)
    if not args.interruptions and not args.traces:
        raise InputError("give --interruptions and/or --traces")
    run = Run(args, {"iterations": args.iterations, "horizon_years": args.horizon_years, "n_cemi": args.n_cemi,
                     "step_hours": args.step_hours, "weights": args.weights},
              [args.system, args.interruptions, *(args.traces or [])])
    report = IndexReport(thresholds={"momentary_threshold_min": args.momentary_threshold, "cemi_n": args.n_cemi})
    if args.interruptions:
        if args.iterations is None:
            raise InputError("--iterations is required with --interruptions")
        horizon_h = args.horizon_years * HOURS_PER_YEAR
        logs = read_interruptions_csv(args.interruptions, args.iterations, horizon_h)
        report.customer = customer_indices(logs, model, args.momentary_threshold / 60.0, args.n_cemi)
        report.horizon_hours = horizon_h
    if args.traces:
        weights = args.weights or [1.0] * len(args.traces)
        if len(weights) != len(args.traces):
            raise InputError("--weights needs one value per trace")
        summaries = [read_trace_csv(p, f"t{i}", args.step_hours) for i, p in enumerate(args.traces)]
        from .indices import adequacy_from_series

        total = sum(weights)
        report.probabilistic = adequacy_from_series([s.unserved for s in summaries], [s.load for s in summaries],
                                                    [w / total for w in weights], args.step_hours)
    if all(lp.is_radial for lp in model.load_points):
        report.load_points = load_point_analytic(model)
    run.write_json("index_report.json", report.to_dict())
    run.write_text("index_report.csv", report.to_csv())
    print(f"wrote index_report.json and index_report.csv to {run.out}")
    return EXIT_OK


def cmd_scenarios(args) -> int:
    seed = _seed(args)
    hist = read_history_csv(args.history)
    pv_kw, wind_kw = 1.0, 1.0
    if args.system:
        model = load_system(args.system)
        pv_kw, wind_kw = model.capacity("pv"), model.capacity("wind")
    run = Run(args, {"regimes": args.regimes, "days": args.days, "count": args.count, "threshold": args.threshold,
                     "percentile": args.percentile}, [args.history, args.system])
    cf = combined_cf(hist.pv_cf, hist.wind_cf, pv_kw, wind_kw)
    result: dict = {"history_hours": len(hist)}
    if cf is None:
        result["scarcity"] = {"events": [], "note": "no renewable capacity; scarcity undefined"}
    else:
        events = detect_scarcity(cf_series(cf), args.threshold)
        result["scarcity"] = {
            "threshold": args.threshold,
            "events": [{"start": hist.timestamps[e.start_step].isoformat(), "duration_h": e.duration_hours,
                        "min_cf": e.min_cf} for e in events],
        }
        if events:
            result["scarcity"]["percentile"] = args.percentile
            result["scarcity"]["storage_duration_h"] = scarcity_percentile(events, args.percentile)
    if args.count > 0:
        rm = fit_regimes(hist.daily_profiles(), args.regimes, seed=derive_seed(seed, 0))
        files = []
        for k in range(args.count):
            sc = sample_chronology(rm, args.days, derive_seed(seed, 1, k), f"sample{k}")
            name = f"scenario_{k}.csv"
            write_history_csv(run.out / name, sc)
            files.append(name)
        result["regimes"] = {"count": rm.regime_count, "centroids_pv_wind_load": rm.centroids,
                             "transition_counts": rm.transition_counts, "stationary": rm.stationary()}
        result["scenario_files"] = files
        result["probabilities"] = [1.0 / args.count] * args.count
    run.write_json("scenarios.json", result)
    print(f"wrote scenarios.json to {run.out}")
    return EXIT_OK


def _plan_path(base: Path, p: str) -> str:
    q = Path(p)
    return str(q if q.is_absolute() else base / q)


def cmd_plan(args) -> int:
    doc = read_json(args.plan)
    if not isinstance(doc, dict):
        raise InputError("plan document must be a JSON object", args.plan)
    base = Path(args.plan).parent
    try:
        system_path = _plan_path(base, doc["system"])
        scen = doc["scenarios"]
        grid = CandidateGrid.from_dict(doc["candidate_grid"])
        targets = ReliabilityTargets.from_dict(doc.get("targets", {}))
        cost = CostModel.from_dict(doc.get("cost_model", {}))
        protection = ProtectionRules.from_dict(doc.get("protection", {}))
    except KeyError as exc:
        raise InputError(f"missing required key {exc.args[0]!r}", args.plan) from None
    except TypeError as exc:
        raise InputError(f"invalid plan document: {exc}", args.plan) from None
    if isinstance(scen, dict):
        paths, weights = scen.get("paths", []), scen.get("weights")
    else:
        paths, weights = list(scen), None
    paths = [_plan_path(base, p) for p in paths]
    model = load_system(system_path)
    ss = load_scenarios(paths, weights)
    policy = DispatchPolicy.from_dict(doc.get("policy", {}))
    policy.check(model)
    seed = args.seed if args.seed is not None else doc.get("seed")
    mcs_cfg = verify_cfg = None
    for key, k in (("mcs", 0), ("verify_mcs", 1)):
        if doc.get(key) is None:
            continue
        d = dict(doc[key])
        if seed is not None:
            d["seed"] = derive_seed(int(seed), 2, k)
        d["threads"] = 1
        try:
            cfg = McsConfig.from_dict(d)
        except TypeError as exc:
            raise InputError(f"invalid {key} config: {exc}", args.plan) from None
        cfg.check()
        if key == "mcs":
            mcs_cfg = cfg
        else:
            verify_cfg = cfg
    run = Run(args, {"plan": doc, "seed": seed}, [args.plan, system_path, *paths])
    result = search(grid, targets, cost, model, ss, policy, mcs_cfg, verify_cfg, protection,
                    coarse_stride=int(doc.get("coarse_stride", 1)),
                    min_storage_kwh=float(doc.get("min_storage_kwh", 0.0)), threads=args.threads)
    run.write_json("plan_result.json", result.to_dict())
    run.write_text("frontier.csv", result.frontier_csv())
    print(result.summary())
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def cmd_advise(args) -> int:
    adv = advise(args.context)
    if args.format == "json":
        sys.stdout.write(dumps(adv.to_dict()))
    else:
        print(adv.to_text())
    if args.out_given:
        Run(args, {"context": args.context}, []).write_json("advice.json", adv.to_dict())
    return EXIT_OK


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, help="64-bit seed driving every random stream")
    common.add_argument("--threads", type=_positive_int, default=1, help="worker threads (does not change results)")
    common.add_argument("--out", default=None, help="output directory (default: current directory)")
    common.add_argument("--momentary-threshold", type=float, default=5.0, metavar="MINUTES",
                        help="interruptions shorter than this are momentary (default 5)")

    p = argparse.ArgumentParser(prog="relgrid", description="Microgrid reliability evaluation and planning.")
    p.add_argument("--version", action="version", version=f"relgrid {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("evaluate", parents=[common], help="dispatch scenarios and report adequacy indices")
    e.add_argument("system")
    e.add_argument("scenarios", nargs="+", help="history-format CSV files")
    e.add_argument("--weights", type=float, nargs="+")
    e.add_argument("--policy")
    e.set_defaults(func=cmd_evaluate)

    m = sub.add_parser("mcs", parents=[common], help="Monte Carlo reliability evaluation")
    m.add_argument("system")
    m.add_argument("--config", help="JSON McsConfig fields")
    m.add_argument("--scenarios", nargs="+")
    m.add_argument("--weights", type=float, nargs="+")
    m.add_argument("--policy")
    m.add_argument("--iterations", type=int)
    m.add_argument("--horizon-years", type=float)
    m.add_argument("--mode", choices=("sequential", "nonsequential"))
    m.add_argument("--convergence", choices=("fixed", "cov"))
    m.add_argument("--cov-epsilon", type=float)
    m.add_argument("--max-iterations", type=int)
    m.add_argument("--n-cemi", type=int, default=1)
    m.add_argument("--no-seed-ok", action="store_true", help="allow a run without --seed")
    m.set_defaults(func=cmd_mcs)

    i = sub.add_parser("indices", parents=[common], help="indices from exported MCS or dispatch outputs")
    i.add_argument("system")
    i.add_argument("--interruptions", help="interruptions.csv written by mcs")
    i.add_argument("--iterations", type=int)
    i.add_argument("--horizon-years", type=float, default=1.0)
    i.add_argument("--n-cemi", type=int, default=1)
    i.add_argument("--traces", nargs="+", help="trace CSVs written by evaluate")
    i.add_argument("--weights", type=float, nargs="+")
    i.add_argument("--step-hours", type=float, default=1.0)
    i.set_defaults(func=cmd_indices)

    s = sub.add_parser("scenarios", parents=[common], help="scarcity analysis and regime-based scenario sampling")
    s.add_argument("history")
    s.add_argument("--system", help="system JSON for capacity-weighted scarcity")
    s.add_argument("--regimes", type=int, default=3)
    s.add_argument("--days", type=int, default=365)
    s.add_argument("--count", type=int, default=0, help="number of sampled scenarios")
    s.add_argument("--threshold", type=float, default=0.15)
    s.add_argument("--percentile", type=float, default=0.95)
    s.add_argument("--no-seed-ok", action="store_true")
    s.set_defaults(func=cmd_scenarios)

    pl = sub.add_parser("plan", parents=[common], help="reliability-constrained sizing search")
    pl.add_argument("plan")
    pl.set_defaults(func=cmd_plan)

    a = sub.add_parser("advise", parents=[common], help="recommended indices for a decision context")
    a.add_argument("context", help="one of: " + ", ".join(CONTEXTS))
    a.add_argument("--format", choices=("text", "json"), default="text")
    a.set_defaults(func=cmd_advise)
    return p


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _error(kind: str, exc: BaseException) -> None:
    payload = {"error": kind, "message": str(exc)}
    for attr in ("file", "line", "column"):
        val = getattr(exc, attr, None)
        if val is not None:
            payload[attr] = val
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("RELGRID_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.out_given = args.out is not None
    if args.out is None:
        args.out = "."
    try:
        return args.func(args)
    except (InputError, InputFormatError) as exc:
        _error("input", exc)
        return EXIT_INPUT
    except (ModelError, ScenarioError, McsError, PlanError, IndicesError, ValueError) as exc:
        _error("input", exc)
        return EXIT_INPUT
    except InvariantViolation as exc:
        _error("invariant", exc)
        return EXIT_INVARIANT
    except Exception as exc:  # noqa: BLE001
        log.debug("internal failure", exc_info=True)
        _error("internal", exc)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
