"""Run configuration and parameter files.

Run configs are INI files whose sections mirror the package modules::

    [machine]     r_s, r_r, l_ls, l_lr, l_m, pole_pairs, inertia, friction
    [inverter]    v_dc
    [hysteresis]  band, dead_zone, period
    [foc]         lambda_r_ref
    [fuzzy]       params (baseline | tuned | tune | <path>), torque_limit,
                  or the nine fields k1 ... c2 inline
    [pso]         n_max, n_pop, c1, c2, w_max, w_min, stall_generations,
                  function_tolerance, workers
    [sim]         scenario, dt, speed_period, trace_period
    [tuning]      horizon, dt
    [run]         seed, out_dir

Every key is optional; omitted keys take the package defaults. Parameter
files (``*.params``) hold the nine fuzzy parameters as ``name = value``
lines in the fixed order k1, k2, k3, a1, a2, b1, b2, c1, c2.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from .fuzzy import BASELINE, PARAM_BOUNDS, PARAM_NAMES, FuzzyParams, FuzzyParamsError
from .hysteresis import HysteresisConfig
from .inverter import InverterConfig
from .machine import MachineParams
from .pso import FitnessSpec, SwarmConfig, SwarmConfigError
from .sim import DEFAULT_TUNING_HORIZON, DriveConfig, ScenarioError, get_scenario, tuning_scenario


class ConfigError(ValueError):
    def __init__(self, message: str, section: str | None = None, key: str | None = None,
                 line: int | None = None, source: str | None = None):
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if section:
            where.append(f"[{section}]" + (f" {key}" if key else ""))
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.section, self.key, self.line = section, key, line


_FLOAT, _INT, _STR = float, int, str

SCHEMA: dict[str, dict[str, type]] = {
    "machine": {"r_s": _FLOAT, "r_r": _FLOAT, "l_ls": _FLOAT, "l_lr": _FLOAT, "l_m": _FLOAT,
                "pole_pairs": _INT, "inertia": _FLOAT, "friction": _FLOAT},
    "inverter": {"v_dc": _FLOAT},
    "hysteresis": {"band": _FLOAT, "dead_zone": _FLOAT, "period": _FLOAT},
    "foc": {"lambda_r_ref": _FLOAT},
    "fuzzy": {"params": _STR, "torque_limit": _FLOAT, **{n: _FLOAT for n in PARAM_NAMES}},
    "pso": {"n_max": _INT, "n_pop": _INT, "c1": _FLOAT, "c2": _FLOAT, "w_max": _FLOAT,
            "w_min": _FLOAT, "stall_generations": _INT, "function_tolerance": _FLOAT,
            "workers": _INT},
    "sim": {"scenario": _STR, "dt": _FLOAT, "speed_period": _FLOAT, "trace_period": _FLOAT},
    "tuning": {"horizon": _FLOAT, "dt": _FLOAT},
    "run": {"seed": _INT, "out_dir": _STR},
}


@dataclass
class RunConfig:
    drive: DriveConfig = field(default_factory=DriveConfig)
    fuzzy_params: FuzzyParams | None = BASELINE
    tune: bool = False
    swarm: SwarmConfig = field(default_factory=SwarmConfig)
    fitness: FitnessSpec = field(default_factory=lambda: FitnessSpec(drive=DriveConfig()))
    scenario: str = "const-120-100"
    out_dir: str = "out"
    seed: int = 0
    workers: int = 1

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed, swarm=replace(self.swarm, seed=seed))


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    lines = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            section = m.group(1).strip()
            lines[(section, "")] = no
            continue
        m = re.match(r"^([A-Za-z0-9_]+)\s*[=:]", line)
        if m and section is not None:
            lines.setdefault((section, m.group(1).lower()), no)
    return lines


def _convert(kind: type, raw: str, section: str, key: str, line, source):
    try:
        if kind is _INT:
            value = int(raw, 10)
        elif kind is _FLOAT:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError("not finite")
        else:
            value = raw.strip()
    except ValueError:
        raise ConfigError(f"expected {kind.__name__}, got {raw!r}", section, key, line, source) from None
    return value


def parse_config_text(text: str, source: str | None = None) -> dict[str, dict]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        first = str(exc).splitlines()[0].rstrip(".")
        raise ConfigError(f"cannot parse: {first}", line=line, source=source) from None
    lines = _key_lines(text)
    out: dict[str, dict] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section; expected one of {', '.join(SCHEMA)}",
                              section, line=lines.get((section, "")), source=source)
        values = {}
        for key, raw in parser.items(section):
            line = lines.get((section, key))
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key; expected one of {', '.join(SCHEMA[section])}",
                                  section, key, line, source)
            values[key] = (_convert(SCHEMA[section][key], raw, section, key, line, source), line)
        out[section] = values
    return out


def _build(section, cls, values, base, source):
    kwargs = {k: v for k, (v, _) in values.items() if k in {f.name for f in fields(cls)}}
    try:
        return replace(base, **kwargs) if base is not None else cls(**kwargs)
    except (ValueError, TypeError) as exc:
        # attribute the error to the first key it names, else to the section
        key = next((k for k in values if re.search(rf"\b{k}\b", str(exc))), None)
        line = values[key][1] if key else None
        raise ConfigError(str(exc), section, key, line, source) from None


def _fuzzy_params_from(values, source, base_dir: Path | None):
    inline = {k: v for k, (v, _) in values.items() if k in PARAM_NAMES}
    choice = values.get("params", (None, None))[0]
    if inline and choice is not None:
        raise ConfigError("give either 'params' or the nine inline fields, not both",
                          "fuzzy", "params", values["params"][1], source)
    if inline:
        for name, value in inline.items():
            lo, hi = PARAM_BOUNDS[name]
            if not lo <= value <= hi:
                raise ConfigError(f"{name}={value!r} outside the allowed range "
                                  f"{lo} <= {name} <= {hi:g}", "fuzzy", name, values[name][1],
                                  source)
        missing = [n for n in PARAM_NAMES if n not in inline]
        if missing:
            raise ConfigError(f"missing fields {', '.join(missing)}", "fuzzy", source=source)
        try:
            return FuzzyParams(**inline), False
        except FuzzyParamsError as exc:
            key = next((k for k in PARAM_NAMES if re.search(rf"\b{k}\b", str(exc))), None)
            raise ConfigError(str(exc), "fuzzy", key, values[key][1] if key else None,
                              source) from None
    if choice is None or choice == "baseline":
        return BASELINE, False
    if choice == "tune":
        return None, True
    try:
        path = Path(choice)
        if base_dir is not None and not path.is_absolute() and choice != "tuned":
            path = base_dir / path
        return resolve_params(choice if choice == "tuned" else str(path)), False
    except (OSError, ConfigError) as exc:
        raise ConfigError(f"cannot load parameters: {exc}", "fuzzy", "params",
                          values["params"][1], source) from None


# (section, key, fragment of the error message that identifies the key)
_DRIVE_HINTS = (
    ("hysteresis", "period", "hysteresis period"),
    ("sim", "speed_period", "speed loop period"),
    ("sim", "trace_period", "trace period"),
    ("foc", "lambda_r_ref", "flux"),
    ("fuzzy", "torque_limit", "torque_limit"),
    ("sim", "dt", "dt"),
)
_PSO_HINTS = (
    ("pso", "n_max", "n_max"), ("pso", "n_pop", "n_pop"),
    ("pso", "stall_generations", "stall_generations"),
    ("pso", "function_tolerance", "function_tolerance"),
    ("pso", "c1", "C1 + C2"), ("pso", "c2", "C1 + C2"),
    ("pso", "w_min", "w_min"), ("pso", "w_max", "w_max"),
    ("run", "seed", "seed"),
)


def _attribute(exc: Exception, data, hints, source) -> ConfigError:
    """Point a validation error at the config key that caused it, if it was given."""
    message = str(exc)
    section = hints[0][0]
    for sec, key, fragment in hints:
        if fragment in message:
            section = sec
            if key in data.get(sec, {}):
                return ConfigError(message, sec, key, data[sec][key][1], source)
    return ConfigError(message, section, source=source)


def config_from_mapping(data: dict[str, dict], source: str | None = None,
                        base_dir: Path | None = None) -> RunConfig:
    get = lambda name: data.get(name, {})  # noqa: E731
    machine = _build("machine", MachineParams, get("machine"), None, source)
    inverter = _build("inverter", InverterConfig, get("inverter"), None, source)
    hyst = _build("hysteresis", HysteresisConfig, get("hysteresis"), None, source)

    drive_kwargs = {"machine": machine, "inverter": inverter, "hysteresis": hyst}
    if "lambda_r_ref" in get("foc"):
        drive_kwargs["lambda_r_ref"] = get("foc")["lambda_r_ref"][0]
    if "torque_limit" in get("fuzzy"):
        drive_kwargs["torque_limit"] = get("fuzzy")["torque_limit"][0]
    if "period" in get("hysteresis"):
        drive_kwargs["hcc_period"] = get("hysteresis")["period"][0]
    for key in ("dt", "speed_period", "trace_period"):
        if key in get("sim"):
            drive_kwargs[key] = get("sim")[key][0]
    try:
        drive = DriveConfig(**drive_kwargs)
    except ValueError as exc:
        raise _attribute(exc, data, _DRIVE_HINTS, source) from None

    params, tune = _fuzzy_params_from(get("fuzzy"), source, base_dir)

    run = get("run")
    seed = run.get("seed", (0, None))[0]
    pso_values = dict(get("pso"))
    workers = pso_values.pop("workers", (1, None))[0]
    if workers < 1:
        raise ConfigError("workers must be >= 1", "pso", "workers", get("pso")["workers"][1], source)
    swarm = _build("pso", SwarmConfig, pso_values, SwarmConfig(seed=seed), source)
    try:
        swarm.validate()
    except SwarmConfigError as exc:
        raise _attribute(exc, data, _PSO_HINTS, source) from None

    tuning = get("tuning")
    horizon = tuning.get("horizon", (DEFAULT_TUNING_HORIZON, None))[0]
    fit_dt = tuning.get("dt", (1e-5, None))[0]
    try:
        fit = FitnessSpec(tuning_scenario(horizon), horizon, fit_dt, drive)
        fit.drive_config()
    except ValueError as exc:
        raise ConfigError(str(exc), "tuning", source=source) from None

    scenario = get("sim").get("scenario", ("const-120-100", None))
    try:
        get_scenario(scenario[0])
    except ScenarioError as exc:
        raise ConfigError(str(exc), "sim", "scenario", scenario[1], source) from None

    return RunConfig(drive=drive, fuzzy_params=params, tune=tune, swarm=swarm, fitness=fit,
                     scenario=scenario[0], out_dir=run.get("out_dir", ("out", None))[0],
                     seed=seed, workers=workers)


def load_config(path=None, text: str | None = None) -> RunConfig:
    if path is None and text is None:
        return RunConfig()
    if text is None:
        path = Path(path)
        text = path.read_text()
        return config_from_mapping(parse_config_text(text, str(path)), str(path), path.parent)
    return config_from_mapping(parse_config_text(text))


# -- parameter files ---------------------------------------------------------

def format_params(params: FuzzyParams) -> str:
    return "".join(f"{name} = {getattr(params, name)!r}\n" for name in PARAM_NAMES)


def write_params(params: FuzzyParams, path) -> None:
    Path(path).write_text(format_params(params))


def parse_params(text: str, source: str | None = None) -> FuzzyParams:
    values: dict[str, float] = {}
    lines: dict[str, int] = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line == "[fuzzy]":
            continue
        m = re.match(r"^([A-Za-z0-9_]+)\s*=\s*(\S+)$", line)
        if not m:
            raise ConfigError(f"expected 'name = value', got {raw.strip()!r}", line=no, source=source)
        name, raw_value = m.group(1), m.group(2)
        if name not in PARAM_NAMES:
            raise ConfigError(f"unknown field {name!r}; expected {', '.join(PARAM_NAMES)}",
                              line=no, source=source)
        if name in values:
            raise ConfigError(f"duplicate field {name!r}", line=no, source=source)
        try:
            values[name] = float(raw_value)
        except ValueError:
            raise ConfigError(f"{name}: expected a number, got {raw_value!r}", line=no,
                              source=source) from None
        lines[name] = no
    missing = [n for n in PARAM_NAMES if n not in values]
    if missing:
        raise ConfigError(f"missing fields {', '.join(missing)}", source=source)
    try:
        return FuzzyParams(**values)
    except FuzzyParamsError as exc:
        key = next((k for k in PARAM_NAMES if re.search(rf"\b{k}\b", str(exc))), None)
        raise ConfigError(str(exc), line=lines.get(key), source=source) from None


def read_params(path) -> FuzzyParams:
    path = Path(path)
    return parse_params(path.read_text(), str(path))


def shipped_params(name: str) -> FuzzyParams:
    text = resources.files("fuzzyfoc").joinpath("data", f"{name}.params").read_text()
    return parse_params(text, f"fuzzyfoc/data/{name}.params")


def resolve_params(spec: str) -> FuzzyParams:
    """``baseline``, ``tuned`` (shipped tuning result) or a parameter-file path."""
    if spec == "baseline":
        return BASELINE
    if spec == "tuned":
        return shipped_params("tuned")
    return read_params(spec)

