"""Closed-loop drive simulation: scenarios, traces and performance metrics.

Loop structure per integration step ``dt``:

* speed loop (every ``speed_period``): fuzzy controller -> torque command ->
  flux/torque current set-points and slip frequency;
* every step: synchronous angle, dq -> abc current references;
* every ``hcc_period``: three-level hysteresis decision per phase;
* every step: inverter phase voltages -> machine RK4 step (stationary frame).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _loop
from .foc import FocState
from .fuzzy import DEFAULT_TORQUE_LIMIT, FuzzyParams
from .hysteresis import HysteresisConfig
from .inverter import InverterConfig
from .machine import DivergenceError, MachineParams

try:
    from . import _kernel
except ImportError:  # pragma: no cover - depends on the build
    _kernel = None

BACKENDS = {"python": _loop.closed_loop}
if _kernel is not None:
    BACKENDS["compiled"] = _kernel.closed_loop


def default_backend() -> str:
    forced = os.environ.get("FUZZYFOC_BACKEND")
    if forced:
        if forced not in BACKENDS:
            raise RuntimeError(f"FUZZYFOC_BACKEND={forced!r} is not available; have {sorted(BACKENDS)}")
        return forced
    return "compiled" if "compiled" in BACKENDS else "python"


BACKEND = default_backend()

TRACE_COLUMNS = ("t", "omega_ref", "omega", "te", "tl", "ia", "ib", "ic",
                 "ia_ref", "ib_ref", "ic_ref", "vab", "lambda_dr", "lambda_qr",
                 "ua", "ub", "uc")
# internal columns follow the exported ones
COL = {name: i for i, name in enumerate(TRACE_COLUMNS + ("theta_e",))}

MIN_DT, MAX_DT = 1e-9, 50e-6
STEP_EDGE = 1e-3  # duration of a "sudden" reference change


class ScenarioError(ValueError):
    pass


class MetricsError(ValueError):
    pass


class SimulationDiverged(DivergenceError):
    def __init__(self, time: float, trace: "Trace"):
        super().__init__(f"simulation diverged at t={time:.6g} s", time)
        self.trace = trace


def _check_breakpoints(name, points):
    if not points:
        raise ScenarioError(f"{name}: profile needs at least one breakpoint")
    times = [t for t, _ in points]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ScenarioError(f"{name}: breakpoint times must be strictly increasing")
    if not all(math.isfinite(t) and math.isfinite(v) for t, v in points):
        raise ScenarioError(f"{name}: breakpoints must be finite")


@dataclass(frozen=True)
class Scenario:
    """Reference speed (piecewise linear) and load torque (piecewise constant).

    Speeds are mechanical rad/s, torques N*m, times s.
    """

    name: str
    duration: float
    speed_reference: tuple[tuple[float, float], ...]
    load_torque: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.duration > 0:
            raise ScenarioError(f"{self.name}: duration must be > 0")
        _check_breakpoints(f"{self.name}.speed_reference", self.speed_reference)
        _check_breakpoints(f"{self.name}.load_torque", self.load_torque)
        if self.speed_reference[0][0] > 0 or self.load_torque[0][0] > 0:
            raise ScenarioError(f"{self.name}: profiles must start at t <= 0")

    def speed_at(self, t):
        ts, vs = zip(*self.speed_reference)
        return np.interp(t, ts, vs)

    def load_at(self, t):
        ts, vs = (np.array(a) for a in zip(*self.load_torque))
        idx = np.searchsorted(ts, t, side="right") - 1
        return vs[np.clip(idx, 0, len(vs) - 1)]

    def truncated(self, horizon: float) -> "Scenario":
        return Scenario(self.name, horizon, self.speed_reference, self.load_torque)


def _steps(levels, times, edge=STEP_EDGE):
    points = [(0.0, levels[0])]
    for t, before, after in zip(times, levels, levels[1:]):
        points += [(t, before), (t + edge, after)]
    return tuple(points)


def builtin_scenarios() -> list[Scenario]:
    return [
        Scenario("trapezoid", 3.0,
                 ((0.0, 0.0), (0.5, 100.0), (1.0, 100.0), (1.5, 0.0),
                  (2.0, -100.0), (2.5, -100.0), (3.0, 0.0)),
                 ((0.0, 0.0),)),
        Scenario("const-120-100", 3.0, ((0.0, 120.0),), ((0.0, 100.0),)),
        Scenario("load-steps", 3.0, ((0.0, 100.0),),
                 ((0.0, 50.0), (1.0, 150.0), (2.0, 80.0))),
        Scenario("var-speed-const-torque", 3.0, _steps((50.0, 120.0, 80.0), (1.0, 2.0)),
                 ((0.0, 100.0),)),
        Scenario("var-speed-var-torque", 3.0, _steps((50.0, 120.0, 80.0), (1.0, 2.0)),
                 ((0.0, 30.0), (1.0, 150.0), (2.0, 100.0))),
    ]


DEFAULT_TUNING_HORIZON = 1.5


def tuning_scenario(horizon: float = DEFAULT_TUNING_HORIZON) -> Scenario:
    """Step to 120 rad/s at t = 0 against a 100 N*m load."""
    return Scenario("tuning", horizon, ((0.0, 120.0),), ((0.0, 100.0),))


def get_scenario(name: str) -> Scenario:
    table = {s.name: s for s in builtin_scenarios()}
    table["tuning"] = tuning_scenario()
    try:
        return table[name]
    except KeyError:
        raise ScenarioError(
            f"unknown scenario {name!r}; available: {', '.join(sorted(table))}") from None


def _decimation(period: float, dt: float, what: str) -> int:
    if not (math.isfinite(period) and period > 0):
        raise ValueError(f"{what} period must be finite and > 0, got {period!r}")
    n = round(period / dt)
    if n < 1 or abs(n * dt - period) > 1e-9 * max(period, dt):
        raise ValueError(f"{what} period {period!r} must be a positive multiple of dt={dt!r}")
    return n


@dataclass(frozen=True)
class DriveConfig:
    machine: MachineParams = field(default_factory=MachineParams)
    inverter: InverterConfig = field(default_factory=InverterConfig)
    hysteresis: HysteresisConfig = field(default_factory=HysteresisConfig)
    lambda_r_ref: float = 0.96
    torque_limit: float = DEFAULT_TORQUE_LIMIT
    dt: float = 2e-6
    speed_period: float = 1e-4
    hcc_period: float | None = None
    trace_period: float = 1e-4

    def __post_init__(self):
        FocState(0.0, self.lambda_r_ref)
        if not (math.isfinite(self.torque_limit) and self.torque_limit > 0):
            raise ValueError("torque_limit must be > 0")
        if not (math.isfinite(self.dt) and MIN_DT <= self.dt <= MAX_DT):
            raise ValueError(f"dt must be in [{MIN_DT:g}, {MAX_DT:g}] s, got {self.dt!r}")
        self.decimations()

    def decimations(self) -> tuple[int, int, int]:
        hcc = self.dt if self.hcc_period is None else self.hcc_period
        return (_decimation(self.speed_period, self.dt, "speed loop"),
                _decimation(hcc, self.dt, "hysteresis"),
                _decimation(self.trace_period, self.dt, "trace"))

    def with_dt(self, dt: float) -> "DriveConfig":
        from dataclasses import replace
        return replace(self, dt=dt)


@dataclass
class Trace:
    data: np.ndarray
    sample_period: float
    dt: float
    switch_events: tuple[int, int, int]
    illegal_transitions: int
    duration: float

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, COL[name]]

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def t(self) -> np.ndarray:
        return self["t"]

    @property
    def error(self) -> np.ndarray:
        return self["omega_ref"] - self["omega"]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for row in self.data[:, :len(TRACE_COLUMNS)]:
                fh.write(",".join(format(float(v), ".9g") for v in row) + "\n")

    @classmethod
    def from_csv(cls, path, dt: float | None = None) -> "Trace":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        period = float(data[1, 0] - data[0, 0]) if len(data) > 1 else 0.0
        return cls(data, period, dt or period, (0, 0, 0), 0, float(data[-1, 0]) + period)


def run(scenario: Scenario, fuzzy_params: FuzzyParams, config: DriveConfig | None = None,
        duration: float | None = None, backend: str | None = None) -> Trace:
    """Simulate the closed-loop drive over ``scenario`` (or its first ``duration`` s)."""
    config = config or DriveConfig()
    duration = scenario.duration if duration is None else duration
    if not duration > 0:
        raise ValueError("duration must be > 0")
    backend = backend or BACKEND
    loop = BACKENDS[backend]
    speed_decim, hcc_decim, trace_decim = config.decimations()
    m = config.machine
    mp = [m.r_s, m.r_r, m.l_s, m.l_r, m.l_m, float(m.pole_pairs), m.inertia, m.friction]
    sp_t, sp_v = (list(a) for a in zip(*scenario.speed_reference))
    ld_t, ld_v = (list(a) for a in zip(*scenario.load_torque))
    n_steps = int(round(duration / config.dt))
    rows, switches, illegal, fail = loop(
        mp, fuzzy_params.as_vector(),
        [config.torque_limit, config.lambda_r_ref],
        [config.hysteresis.band, config.hysteresis.dead_zone],
        config.inverter.v_dc, config.dt, n_steps,
        speed_decim, hcc_decim, trace_decim,
        sp_t, sp_v, ld_t, ld_v, [0.0] * 8)
    trace = Trace(rows, config.trace_period, config.dt,
                  tuple(int(s) for s in switches), int(illegal), duration)
    if fail >= 0:
        raise SimulationDiverged(fail * config.dt, trace)
    if not np.all(np.isfinite(rows)):
        raise SimulationDiverged(float(rows[~np.isfinite(rows).all(axis=1), 0][0]), trace)
    return trace


def integral_errors(t: np.ndarray, e: np.ndarray, sample_period: float) -> tuple[float, float]:
    """Rectangle-rule IAE and ITAE over samples ``e(t_k)``."""
    a = np.abs(np.asarray(e, dtype=float))
    t = np.asarray(t, dtype=float)
    return float(np.sum(a) * sample_period), float(np.sum(a * t) * sample_period)


@dataclass(frozen=True)
class Metrics:
    iae: float
    itae: float
    rise_time: float | None
    overshoot: float
    steady_state_error: float
    speed_ripple: float
    torque_ripple: float
    switching_frequency: float

    @property
    def fitness(self) -> float:
        return self.iae + self.itae

    def as_dict(self) -> dict:
        return {
            "iae": self.iae, "itae": self.itae, "fitness": self.fitness,
            "rise_time": self.rise_time, "overshoot": self.overshoot,
            "steady_state_error": self.steady_state_error,
            "speed_ripple": self.speed_ripple, "torque_ripple": self.torque_ripple,
            "switching_frequency": self.switching_frequency,
        }


def _final_segment(scenario: Scenario, duration: float) -> tuple[float, float, float]:
    """Start time, value and entry step of the last reference segment before ``duration``."""
    pts = [(t, v) for t, v in scenario.speed_reference if t < duration] or [scenario.speed_reference[0]]
    start, final = pts[-1]
    start = max(start, 0.0)
    prev = final
    for t, v in reversed(pts[:-1]):
        if v != final:
            prev = v
            break
    return start, final, final - prev


def compute_metrics(trace: Trace, scenario: Scenario, window: float = 0.2) -> Metrics:
    """Performance metrics of a trace.

    IAE/ITAE use the same rectangle rule as the tuning fitness. Overshoot is
    the largest excursion past the final reference value, in percent of the
    step entering that segment (of the value itself if there is no step).
    Rise time is 10 % -> 90 % of the first reference change seen from the
    initial value; ``None`` when the response never gets there. Ripples are
    peak-to-peak over the last ``window`` fraction of the trace.
    """
    n = len(trace)
    if n < 10:
        raise MetricsError(f"trace has {n} samples; at least 10 are needed")
    n_win = int(math.floor(window * n))
    if n_win < 2:
        raise MetricsError("analysis window holds fewer than 2 samples")
    t = trace.t
    w = trace["omega"]
    e = trace.error
    iae, itae = integral_errors(t, e, trace.sample_period)

    duration = trace.duration
    seg_start, final, step = _final_segment(scenario, duration)
    scale = abs(step) if step != 0 else abs(final)
    in_seg = t >= seg_start
    overshoot = 0.0
    if scale > 0 and np.any(in_seg):
        direction = 1.0 if (step if step != 0 else final) > 0 else -1.0
        excess = np.max(direction * (w[in_seg] - final))
        overshoot = max(0.0, float(excess)) / scale * 100.0

    rise = None
    ref0 = trace["omega_ref"][0]
    target = next((v for _, v in scenario.speed_reference if v != ref0), None)
    if target is None and ref0 != 0:
        target, ref0 = ref0, 0.0
    if target is not None:
        delta = target - ref0
        progress = (w - ref0) / delta
        lo = np.nonzero(progress >= 0.1)[0]
        hi = np.nonzero(progress >= 0.9)[0]
        if lo.size and hi.size:
            rise = float(t[hi[0]] - t[lo[0]])

    tail = slice(n - n_win, n)
    sse = float(np.mean(e[tail]))
    speed_ripple = float(np.ptp(w[tail]))
    torque_ripple = float(np.ptp(trace["te"][tail]))
    switching = float(sum(trace.switch_events)) / (3.0 * duration)
    return Metrics(iae, itae, rise, overshoot, sse, speed_ripple, torque_ripple, switching)
