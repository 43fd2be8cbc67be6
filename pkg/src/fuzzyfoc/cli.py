"""Command-line front end: ``fuzzyfoc <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig, load_config, resolve_params, write_params
from .fuzzy import FuzzyParams
from .pso import FitnessSpec, SwarmConfigError, check_stability, tune
from .sim import (MetricsError, Scenario, ScenarioError,
                  SimulationDiverged, builtin_scenarios, compute_metrics, get_scenario, run,
                  tuning_scenario)

log = logging.getLogger("fuzzyfoc")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "out_dir", None):
        cfg = replace(cfg, out_dir=args.out_dir)
    if getattr(args, "scenario", None):
        get_scenario(args.scenario)
        cfg = replace(cfg, scenario=args.scenario)
    if getattr(args, "workers", None):
        cfg = replace(cfg, workers=args.workers)
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fitness_spec(cfg: RunConfig, args) -> FitnessSpec:
    spec = cfg.fitness
    horizon = args.horizon if args.horizon is not None else spec.horizon
    dt = args.dt if args.dt is not None else spec.dt
    return FitnessSpec(tuning_scenario(horizon), horizon, dt, cfg.drive)


def _scenario(cfg: RunConfig, horizon: float | None) -> Scenario:
    scenario = get_scenario(cfg.scenario)
    if horizon is not None:
        scenario = scenario.truncated(horizon)
    return scenario


def _run_tuning(cfg: RunConfig, spec: FitnessSpec, out: Path) -> FuzzyParams:
    report = check_stability(cfg.swarm)
    if not report.ok:
        raise SwarmConfigError("swarm parameters violate the convergence conditions:\n"
                               + report.describe(), report)

    def progress(rec):
        log.info("generation %3d  best %.6g  mean %.6g  w %.4f",
                 rec.generation, rec.best_f, rec.mean_f, rec.w)

    best, result = tune(spec, cfg.swarm, workers=cfg.workers, callback=progress)
    result.write_history(out / "history.csv")
    write_params(best, out / "best.params")
    print(f"best fitness {result.best_fitness:.6g} after {result.generations} generations"
          + (" (stalled)" if result.stalled else ""))
    return best


def _simulate_one(cfg: RunConfig, scenario: Scenario, params: FuzzyParams):
    trace = run(scenario, params, cfg.drive)
    return trace, compute_metrics(trace, scenario)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if args.dt is not None:
        cfg = replace(cfg, drive=cfg.drive.with_dt(args.dt))
    out = _out_dir(cfg)
    if args.params:
        params = resolve_params(args.params)
    elif cfg.tune:
        params = _run_tuning(cfg, cfg.fitness, out)
    else:
        params = cfg.fuzzy_params
    scenario = _scenario(cfg, args.horizon)
    try:
        trace, metrics = _simulate_one(cfg, scenario, params)
    except SimulationDiverged as exc:
        exc.trace.to_csv(out / "trace.csv")
        print(f"error: simulation diverged at t = {exc.time:.6g} s", file=sys.stderr)
        return EXIT_DIVERGED
    trace.to_csv(out / "trace.csv")
    _dump_json({"scenario": scenario.name, "duration": trace.duration,
                "params": params.as_dict(), "metrics": metrics.as_dict(),
                "switch_events": list(trace.switch_events),
                "illegal_transitions": trace.illegal_transitions}, out / "metrics.json")
    print(f"{scenario.name}: IAE+ITAE {metrics.fitness:.6g}, overshoot {metrics.overshoot:.3g} %, "
          f"ss error {metrics.steady_state_error:.3g} rad/s -> {out}")
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    _run_tuning(cfg, _fitness_spec(cfg, args), out)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load(args)
    if args.dt is not None:
        cfg = replace(cfg, drive=cfg.drive.with_dt(args.dt))
    out = _out_dir(cfg)
    labels = (args.params[0], args.params[1]) if args.params else ("baseline", "tuned")
    sets = [resolve_params(p) for p in labels]
    if args.scenario:
        scenarios = [_scenario(cfg, args.horizon)]
    else:
        scenarios = [s.truncated(args.horizon) if args.horizon else s for s in builtin_scenarios()]
        spec = _fitness_spec(cfg, args)
        scenarios.append(spec.scenario)
    report = {"controllers": {"a": labels[0], "b": labels[1]},
              "params": {"a": sets[0].as_dict(), "b": sets[1].as_dict()},
              "scenarios": {}}
    for scenario in scenarios:
        entry = {}
        for key, params in zip(("a", "b"), sets):
            try:
                _, metrics = _simulate_one(cfg, scenario, params)
                entry[key] = metrics.as_dict()
            except SimulationDiverged as exc:
                entry[key] = {"diverged_at": exc.time}
        if "fitness" in entry["a"] and "fitness" in entry["b"]:
            entry["b_not_worse"] = entry["b"]["fitness"] <= entry["a"]["fitness"]
        report["scenarios"][scenario.name] = entry
        fa = entry["a"].get("fitness", float("inf"))
        fb = entry["b"].get("fitness", float("inf"))
        print(f"{scenario.name:24s} F({labels[0]}) = {fa:10.4g}   F({labels[1]}) = {fb:10.4g}")
    _dump_json(report, out / "report.json")
    return EXIT_OK


def cmd_check_stability(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    swarm = cfg.swarm
    overrides = {k: getattr(args, k) for k in ("c1", "c2", "w_min", "w_max")
                 if getattr(args, k) is not None}
    swarm = replace(swarm, **overrides)
    report = check_stability(swarm)
    print(f"C1 = {swarm.c1:g}, C2 = {swarm.c2:g}, w in [{swarm.w_min:g}, {swarm.w_max:g}]")
    print(report.describe())
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_list_scenarios(args) -> int:
    for s in builtin_scenarios() + [tuning_scenario()]:
        speeds = " -> ".join(f"{v:g}" for _, v in s.speed_reference)
        loads = " -> ".join(f"{v:g}" for _, v in s.load_torque)
        print(f"{s.name:24s} {s.duration:g} s  speed [{speeds}] rad/s  load [{loads}] N*m")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fuzzyfoc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI run configuration")
        p.add_argument("--seed", type=int, help="random seed (overrides [run] seed)")
        p.add_argument("--out-dir", help="output directory (overrides [run] out_dir)")
        p.add_argument("--dt", type=float, help="integration step in seconds")
        p.add_argument("--horizon", type=float, help="simulated duration in seconds")

    p = sub.add_parser("simulate", help="run one scenario, write trace.csv and metrics.json")
    common(p)
    p.add_argument("--scenario", help="builtin scenario name")
    p.add_argument("--params", help="'baseline', 'tuned' or a .params file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tune", help="PSO-tune the fuzzy controller, write history.csv and best.params")
    common(p)
    p.add_argument("--workers", type=int, help="threads for fitness evaluation")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("compare", help="side-by-side metrics of two parameter sets, write report.json")
    common(p)
    p.add_argument("--scenario", help="builtin scenario name (default: all, plus the tuning scenario)")
    p.add_argument("--params", nargs=2, metavar=("A", "B"),
                   help="two of 'baseline', 'tuned' or .params files (default: baseline tuned)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("check-stability", help="check the swarm convergence conditions")
    p.add_argument("--config", help="INI run configuration")
    for name in ("c1", "c2", "w_min", "w_max"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)
    p.set_defaults(func=cmd_check_stability)

    p = sub.add_parser("list-scenarios", help="list builtin scenarios")
    p.set_defaults(func=cmd_list_scenarios)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return args.func(args)
    except SwarmConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (ConfigError, ScenarioError, MetricsError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
