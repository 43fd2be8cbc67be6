import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzyfoc.config import (SCHEMA, ConfigError, format_params, load_config, parse_params,
                             read_params, resolve_params, shipped_params, write_params)
from fuzzyfoc.fuzzy import BASELINE, PARAM_BOUNDS, FuzzyParams
from fuzzyfoc.pso import SwarmConfig

VALID = {
    "machine": {"r_s": 0.087, "r_r": 0.228, "l_ls": 0.0008, "l_lr": 0.0008, "l_m": 0.0347,
                "pole_pairs": 2, "inertia": 1.662, "friction": 0.0},
    "inverter": {"v_dc": 700.0},
    "hysteresis": {"band": 0.5, "dead_zone": 0.05},
    "foc": {"lambda_r_ref": 0.96},
    "fuzzy": {"torque_limit": 400.0, **BASELINE.as_dict()},
    "pso": {"n_max": 100, "n_pop": 30, "c1": 0.5, "c2": 1.25, "w_max": 0.9, "w_min": 0.4,
            "stall_generations": 20, "function_tolerance": 1e-6, "workers": 1},
    "sim": {"scenario": "const-120-100", "dt": 2e-6, "speed_period": 1e-4,
            "trace_period": 1e-4},
    "tuning": {"horizon": 1.5, "dt": 1e-5},
    "run": {"seed": 0, "out_dir": "out"},
}


def render(cfg) -> str:
    out = []
    for section, values in cfg.items():
        out.append(f"[{section}]")
        out += [f"{k} = {v!r}" if not isinstance(v, str) else f"{k} = {v}"
                for k, v in values.items()]
    return "\n".join(out) + "\n"


def _multiple(period, dt):
    if not period > 0:
        return False
    n = round(period / dt)
    return n >= 1 and abs(n * dt - period) <= 1e-9 * max(period, dt)


def expected_valid(cfg) -> bool:
    """Module invariants, restated independently of the package."""
    m = cfg["machine"]
    if not all(m[k] > 0 for k in ("r_s", "r_r", "l_ls", "l_lr", "l_m", "inertia")):
        return False
    if m["pole_pairs"] < 1 or m["friction"] < 0:
        return False
    if not cfg["inverter"]["v_dc"] > 0:
        return False
    h = cfg["hysteresis"]
    if not 0 < h["dead_zone"] < h["band"]:
        return False
    if not cfg["foc"]["lambda_r_ref"] > 0:
        return False
    f = cfg["fuzzy"]
    if not f["torque_limit"] > 0:
        return False
    for name, (lo, hi) in PARAM_BOUNDS.items():
        if not lo <= f[name] <= hi:
            return False
    if not (f["a1"] < f["a2"] and f["b1"] < f["b2"] and f["c1"] < f["c2"]):
        return False
    p = cfg["pso"]
    if p["n_max"] < 1 or p["n_pop"] < 2 or p["stall_generations"] < 1 or p["workers"] < 1:
        return False
    if not p["function_tolerance"] >= 0:
        return False
    total = p["c1"] + p["c2"]
    if not 0 < total < 4 or p["w_min"] > p["w_max"]:
        return False
    if not all(total / 2 - 1 < w < 1 for w in (p["w_min"], p["w_max"])):
        return False
    s = cfg["sim"]
    for dt in (s["dt"], cfg["tuning"]["dt"]):
        if not 1e-9 <= dt <= 50e-6:
            return False
        if not (_multiple(s["speed_period"], dt) and _multiple(s["trace_period"], dt)):
            return False
    if not cfg["tuning"]["horizon"] > 0:
        return False
    return cfg["run"]["seed"] >= 0


def test_valid_config_loads():
    cfg = load_config(text=render(VALID))
    assert cfg.swarm == SwarmConfig()
    assert cfg.fuzzy_params == BASELINE
    assert cfg.drive.dt == 2e-6
    assert expected_valid(VALID)


def test_empty_config_is_default():
    assert load_config(text="") == load_config()


FLOAT_VALUES = st.one_of(
    st.floats(-2.0, 2.0), st.floats(-1e-4, 1e-4), st.floats(0.0, 10.0),
    st.sampled_from([0.0, -0.0, 5e-324, 1e-9, 1e-10, 1e-6, 2e-6, 4e-6, 5e-6, 3e-6, 5e-5, 6e-5, 0.5, 1.0, 3.9, 4.0]))
INT_VALUES = st.integers(-3, 200)
MUTABLE = [(sec, key) for sec, keys in VALID.items() for key in keys
           if not isinstance(VALID[sec][key], str)]


@settings(max_examples=400)
@given(st.sampled_from(MUTABLE), st.data())
def test_validation_rejects_exactly_invalid_configs(where, data):
    section, key = where
    kind = SCHEMA[section][key]
    value = data.draw(INT_VALUES if kind is int else FLOAT_VALUES)
    cfg = {sec: dict(vals) for sec, vals in VALID.items()}
    cfg[section][key] = value
    ok = expected_valid(cfg)
    text = render(cfg)
    if ok:
        load_config(text=text)
    else:
        with pytest.raises(ConfigError):
            load_config(text=text)


@pytest.mark.parametrize("text,line,needle", [
    ("[machine]\nr_s = -1\n", 2, "[machine] r_s"),
    ("[sim]\n\n\ndt = fast\n", 4, "[sim] dt"),
    ("[simulation]\n", 1, "unknown section"),
    ("[pso]\nc1 = 2.5\nc2 = 2.5\n", 2, "C1 + C2"),
    ("[fuzzy]\nparams = baseline\nk1 = 0.001\n", 2, "not both"),
    ("[sim]\nscenario = nope\n", 2, "const-120-100"),
    ("[run]\nseed = 1.5\n", 2, "expected int"),
    ("[tuning]\nhorizon = inf\n", 2, "[tuning] horizon"),
])
def test_diagnostics_name_line_and_field(text, line, needle):
    with pytest.raises(ConfigError) as info:
        load_config(text=text)
    assert f"line {line}" in str(info.value)
    assert needle in str(info.value)


def test_fuzzy_bound_message():
    text = render(VALID).replace("k1 = 0.00667", "k1 = 0.01")
    with pytest.raises(ConfigError, match=r"k1 <= 0.00667"):
        load_config(text=text)


def test_params_directive(tmp_path):
    write_params(BASELINE, tmp_path / "b.params")
    (tmp_path / "run.ini").write_text("[fuzzy]\nparams = b.params\n")
    assert load_config(tmp_path / "run.ini").fuzzy_params == BASELINE
    cfg = load_config(text="[fuzzy]\nparams = tune\n")
    assert cfg.tune and cfg.fuzzy_params is None
    assert load_config(text="[fuzzy]\nparams = tuned\n").fuzzy_params == shipped_params("tuned")


def test_params_round_trip(tmp_path):
    p = FuzzyParams(0.001234567890123, 0.5, 5.999, 0.0, 0.7, 0.1, 0.2, 0.3, 1.0)
    write_params(p, tmp_path / "p.params")
    assert read_params(tmp_path / "p.params") == p
    assert format_params(p).splitlines()[0] == "k1 = 0.001234567890123"


@pytest.mark.parametrize("text,needle", [
    ("k1 = 0.001\n", "missing"),
    (format_params(BASELINE) + "k1 = 0.001\n", "duplicate"),
    (format_params(BASELINE) + "k4 = 1\n", "unknown field"),
    (format_params(BASELINE).replace("k3 = 1.0", "k3 = big"), "expected a number"),
    (format_params(BASELINE).replace("k3 = 1.0", "k3 = 7.0"), "k3 <= 6"),
])
def test_params_errors(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_params(text)


def test_shipped_sets():
    assert resolve_params("baseline") == BASELINE
    assert shipped_params("baseline") == BASELINE
    tuned = resolve_params("tuned")
    assert tuned != BASELINE and not math.isnan(tuned.k1)


@pytest.mark.parametrize("name", ["default.ini", "ci-tune.ini"])
def test_shipped_configs_load(name):
    from pathlib import Path
    cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / name)
    if name == "default.ini":
        assert cfg == load_config()
