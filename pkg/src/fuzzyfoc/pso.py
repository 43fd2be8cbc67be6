"""Global-best particle swarm optimisation with a linearly decaying inertia.

The optimiser is generic (any ``objective(x) -> float`` over a box); the
fuzzy-controller problem adds ordering constraints on the membership peaks
and a closed-loop IAE + ITAE fitness.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fuzzy import ORDERED_PAIRS, PARAM_BOUNDS, PARAM_NAMES, FuzzyParams
from .sim import (DEFAULT_TUNING_HORIZON, DriveConfig, Scenario, SimulationDiverged,
                  integral_errors, run, tuning_scenario)

log = logging.getLogger(__name__)

ORDER_NUDGE = 1e-6


class SwarmConfigError(ValueError):
    def __init__(self, message: str, report: "StabilityReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SwarmConfig:
    n_max: int = 100
    n_pop: int = 30
    n_var: int = 9
    c1: float = 0.5
    c2: float = 1.25
    w_max: float = 0.9
    w_min: float = 0.4
    stall_generations: int = 20
    function_tolerance: float = 1e-6
    seed: int = 0
    lower: tuple[float, ...] = tuple(PARAM_BOUNDS[n][0] for n in PARAM_NAMES)
    upper: tuple[float, ...] = tuple(PARAM_BOUNDS[n][1] for n in PARAM_NAMES)
    # index pairs (i, j) that must satisfy x[i] < x[j]
    ordered_pairs: tuple[tuple[int, int], ...] = tuple(
        (PARAM_NAMES.index(a), PARAM_NAMES.index(b)) for a, b in ORDERED_PAIRS)
    velocity_fraction: float = 0.2

    def validate(self) -> None:
        if self.n_max < 1:
            raise SwarmConfigError(f"n_max must be >= 1, got {self.n_max}")
        if self.n_pop < 2:
            raise SwarmConfigError(f"n_pop must be >= 2, got {self.n_pop}")
        if self.seed < 0:
            raise SwarmConfigError(f"seed must be >= 0, got {self.seed}")
        if self.stall_generations < 1:
            raise SwarmConfigError("stall_generations must be >= 1")
        if not self.function_tolerance >= 0:
            raise SwarmConfigError("function_tolerance must be >= 0")
        if len(self.lower) != self.n_var or len(self.upper) != self.n_var:
            raise SwarmConfigError(f"bounds must have n_var={self.n_var} entries")
        for k, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if not lo < hi:
                raise SwarmConfigError(f"bounds of dimension {k}: need lower < upper, got [{lo}, {hi}]")
        for i, j in self.ordered_pairs:
            if not (0 <= i < self.n_var and 0 <= j < self.n_var and i != j):
                raise SwarmConfigError(f"bad ordered pair {(i, j)}")
        report = check_stability(self)
        if not report.ok:
            raise SwarmConfigError("swarm parameters violate the convergence conditions:\n"
                                   + report.describe(), report)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.lower, dtype=float), np.array(self.upper, dtype=float)


def sphere_config(**overrides) -> SwarmConfig:
    """Default swarm hyperparameters on a 9-dimensional [-1, 1] box, no ordering."""
    base = dict(lower=(-1.0,) * 9, upper=(1.0,) * 9, ordered_pairs=())
    base.update(overrides)
    return SwarmConfig(**base)


@dataclass
class StabilityReport:
    ok: bool
    violations: list[str] = field(default_factory=list)

    def describe(self) -> str:
        return "\n".join(self.violations) if self.violations else "stable"


def check_stability(cfg: SwarmConfig) -> StabilityReport:
    """Check 0 < c1 + c2 < 4 and (c1 + c2)/2 - 1 < w < 1 over [w_min, w_max]."""
    violations = []
    total = cfg.c1 + cfg.c2
    if not 0.0 < total < 4.0:
        violations.append(f"acceleration sum: need 0 < C1 + C2 < 4, got C1 + C2 = {total:g}")
    lower = total / 2.0 - 1.0
    if cfg.w_min > cfg.w_max:
        violations.append(f"inertia schedule: w_min={cfg.w_min:g} exceeds w_max={cfg.w_max:g}")
    for label, w in (("w_min", cfg.w_min), ("w_max", cfg.w_max)):
        if not lower < w:
            violations.append(
                f"inertia lower bound: need (C1 + C2)/2 - 1 < w, got {lower:g} >= {label}={w:g}")
        if not w < 1.0:
            violations.append(f"inertia upper bound: need w < 1, got {label}={w:g}")
    return StabilityReport(not violations, violations)


def inertia_weight(n: int, cfg: SwarmConfig) -> float:
    if not 0 <= n <= cfg.n_max:
        raise ValueError(f"generation {n} outside [0, {cfg.n_max}]")
    return cfg.w_max - (cfg.w_max - cfg.w_min) / cfg.n_max * n


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    personal_best_position: np.ndarray
    personal_best_fitness: float = math.inf


def update_velocity(p: Particle, g_best, w: float, r1, r2, cfg: SwarmConfig) -> np.ndarray:
    x = np.asarray(p.position, dtype=float)
    return (w * np.asarray(p.velocity, dtype=float)
            + cfg.c1 * np.asarray(r1) * (np.asarray(p.personal_best_position) - x)
            + cfg.c2 * np.asarray(r2) * (np.asarray(g_best) - x))


def clamp_velocity(v: np.ndarray, cfg: SwarmConfig) -> np.ndarray:
    lo, hi = cfg.bounds
    vmax = cfg.velocity_fraction * (hi - lo)
    return np.clip(v, -vmax, vmax)


def repair(x, cfg: SwarmConfig) -> np.ndarray:
    """Clamp to the box, then enforce ``x[i] < x[j]`` for each ordered pair."""
    lo, hi = cfg.bounds
    x = np.clip(np.array(x, dtype=float), lo, hi)
    for i, j in cfg.ordered_pairs:
        if x[i] > x[j]:
            x[i], x[j] = x[j], x[i]
        if x[i] == x[j]:
            if x[j] + ORDER_NUDGE <= hi[j]:
                x[j] += ORDER_NUDGE
            else:
                x[i] -= ORDER_NUDGE
    return x


def update_position(p: Particle, v, cfg: SwarmConfig) -> np.ndarray:
    return repair(np.asarray(p.position, dtype=float) + np.asarray(v, dtype=float), cfg)


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_f: float
    mean_f: float
    w: float


@dataclass
class OptimizationResult:
    best_position: np.ndarray
    best_fitness: float
    history: list[GenerationRecord]
    particles: list[Particle]
    stalled: bool

    @property
    def generations(self) -> int:
        return len(self.history)

    def write_history(self, path) -> None:
        write_history(self.history, path)


def write_history(history: Sequence[GenerationRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["generation", "best_f", "mean_f", "w"])
        for rec in history:
            writer.writerow([rec.generation, repr(rec.best_f), repr(rec.mean_f), repr(rec.w)])


def _stalled(best: list[float], cfg: SwarmConfig) -> bool:
    s = cfg.stall_generations
    if len(best) <= s:
        return False
    window = np.asarray(best[-(s + 1):])
    change = np.mean(np.abs(np.diff(window)))
    return bool(change < cfg.function_tolerance)


def optimize(objective: Callable[[np.ndarray], float], cfg: SwarmConfig,
             workers: int = 1,
             callback: Callable[[GenerationRecord], None] | None = None) -> OptimizationResult:
    """Minimise ``objective`` over the configured box.

    Each particle owns a random stream spawned from ``cfg.seed``; objective
    evaluations may run on ``workers`` threads without affecting the result.
    """
    cfg.validate()
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.n_pop)]
    lo, hi = cfg.bounds
    particles = []
    for rng in streams:
        x = repair(lo + rng.random(cfg.n_var) * (hi - lo), cfg)
        particles.append(Particle(x, np.zeros(cfg.n_var), x.copy()))

    g_pos = particles[0].position.copy()
    g_fit = math.inf
    history: list[GenerationRecord] = []
    best_trace: list[float] = []
    stalled = False
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for n in range(cfg.n_max):
            positions = [p.position for p in particles]
            if pool is None:
                values = [float(objective(x)) for x in positions]
            else:
                values = [float(v) for v in pool.map(objective, positions)]
            values = [v if not math.isnan(v) else math.inf for v in values]
            for p, f in zip(particles, values):
                if f < p.personal_best_fitness:
                    p.personal_best_fitness = f
                    p.personal_best_position = p.position.copy()
                if f < g_fit:
                    g_fit = f
                    g_pos = p.position.copy()
            w = inertia_weight(n, cfg)
            finite = [v for v in values if math.isfinite(v)]
            rec = GenerationRecord(n, g_fit, float(np.mean(finite)) if finite else math.inf, w)
            history.append(rec)
            best_trace.append(g_fit)
            log.debug("generation %d best %.6g mean %.6g", n, rec.best_f, rec.mean_f)
            if callback is not None:
                callback(rec)
            if _stalled(best_trace, cfg):
                stalled = True
                break
            if n == cfg.n_max - 1:
                break
            for p, rng in zip(particles, streams):
                r1 = rng.random(cfg.n_var)
                r2 = rng.random(cfg.n_var)
                v = clamp_velocity(update_velocity(p, g_pos, w, r1, r2, cfg), cfg)
                p.velocity = v
                p.position = update_position(p, v, cfg)
    finally:
        if pool is not None:
            pool.shutdown()
    return OptimizationResult(g_pos, g_fit, history, particles, stalled)


@dataclass(frozen=True)
class FitnessSpec:
    """Closed-loop evaluation set-up for the IAE + ITAE fitness."""

    scenario: Scenario = field(default_factory=tuning_scenario)
    horizon: float = DEFAULT_TUNING_HORIZON
    dt: float = 1e-5
    drive: DriveConfig | None = None

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")

    def drive_config(self) -> DriveConfig:
        base = self.drive or DriveConfig()
        return base.with_dt(self.dt)


def fitness_of_errors(t, e, sample_period: float) -> float:
    iae, itae = integral_errors(t, e, sample_period)
    return iae + itae


def fitness(params: FuzzyParams, spec: FitnessSpec, backend: str | None = None) -> float:
    """IAE + ITAE of the speed error at the speed-loop sampling instants."""
    cfg = spec.drive_config()
    if cfg.trace_period != cfg.speed_period:
        from dataclasses import replace
        cfg = replace(cfg, trace_period=cfg.speed_period)
    try:
        trace = run(spec.scenario, params, cfg, duration=spec.horizon, backend=backend)
    except SimulationDiverged:
        return math.inf
    return fitness_of_errors(trace.t, trace.error, trace.sample_period)


def fuzzy_objective(spec: FitnessSpec, backend: str | None = None):
    def objective(x) -> float:
        return fitness(FuzzyParams.from_vector(x), spec, backend)
    return objective


def tune(spec: FitnessSpec, cfg: SwarmConfig, workers: int = 1,
         callback=None) -> tuple[FuzzyParams, OptimizationResult]:
    if cfg.n_var != len(PARAM_NAMES):
        raise SwarmConfigError(f"fuzzy tuning needs n_var={len(PARAM_NAMES)}")
    result = optimize(fuzzy_objective(spec), cfg, workers=workers, callback=callback)
    return FuzzyParams.from_vector(result.best_position), result
