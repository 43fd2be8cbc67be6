import math
from dataclasses import replace

import numpy as np
import pytest

from fuzzyfoc import sim
from fuzzyfoc.config import shipped_params
from fuzzyfoc.fuzzy import BASELINE
from fuzzyfoc.machine import MachineParams
from fuzzyfoc.sim import (COL, TRACE_COLUMNS, DriveConfig, MetricsError, Scenario,
                          ScenarioError, SimulationDiverged, Trace, builtin_scenarios,
                          compute_metrics, get_scenario, run)

TUNED = shipped_params("tuned")


def test_builtin_names():
    names = [s.name for s in builtin_scenarios()]
    assert names == ["trapezoid", "const-120-100", "load-steps", "var-speed-const-torque",
                     "var-speed-var-torque"]


def test_var_speed_const_torque_profile():
    s = get_scenario("var-speed-const-torque")
    assert {v for _, v in s.speed_reference} == {50.0, 120.0, 80.0}
    t = np.linspace(0, s.duration, 301)
    assert np.all(s.load_at(t) == 100.0)


def test_trapezoid_odd_about_midpoint():
    s = get_scenario("trapezoid")
    tau = np.linspace(0, 1.5, 151)
    np.testing.assert_allclose(s.speed_at(1.5 + tau), -s.speed_at(1.5 - tau), atol=1e-12)


def test_profiles_defined_on_whole_horizon():
    for s in builtin_scenarios():
        for t in (0.0, s.duration):
            assert math.isfinite(float(s.speed_at(t)))
            assert math.isfinite(float(s.load_at(t)))


def test_load_steps_profile():
    s = get_scenario("load-steps")
    assert list(s.load_at([0.5, 1.5, 2.5])) == [50.0, 150.0, 80.0]


def test_bad_scenarios():
    with pytest.raises(ScenarioError):
        Scenario("x", 1.0, ((0.0, 1.0), (0.0, 2.0)), ((0.0, 0.0),))
    with pytest.raises(ScenarioError):
        Scenario("x", 0.0, ((0.0, 1.0),), ((0.0, 0.0),))
    with pytest.raises(ScenarioError, match="const-120-100"):
        get_scenario("nope")


def test_drive_config_validation():
    with pytest.raises(ValueError, match="dt"):
        DriveConfig(dt=1e-4)
    with pytest.raises(ValueError, match="speed loop"):
        DriveConfig(dt=3e-6)
    with pytest.raises(ValueError):
        DriveConfig(torque_limit=0.0)
    with pytest.raises(ValueError):
        DriveConfig(lambda_r_ref=0.0)


def test_standstill_without_reference():
    s = Scenario("rest", 1.0, ((0.0, 0.0),), ((0.0, 0.0),))
    tr = run(s, TUNED)
    assert np.max(np.abs(tr["omega"])) < 0.05
    assert np.max(np.abs(tr["te"][-200:])) < 2.0
    assert tr["lambda_dr"][-1] == pytest.approx(0.96, rel=0.02)


def test_load_steps_recovery():
    s = get_scenario("load-steps")
    tr = run(s, TUNED)
    e = tr.error
    t = tr.t
    for t_step in (1.0, 2.0):
        dip = np.max(np.abs(e[(t > t_step) & (t < t_step + 0.5)]))
        settled = np.abs(e[(t > t_step + 0.8) & (t < t_step + 0.99)])
        assert dip < 5.0
        assert settled.max() < 0.05
    assert abs(e[-1]) < 0.5


@pytest.mark.parametrize("scenario", builtin_scenarios(), ids=lambda s: s.name)
def test_no_illegal_transitions(scenario):
    tr = run(scenario, TUNED, duration=0.2)
    assert tr.illegal_transitions == 0
    levels = tr.data[:, [COL["ua"], COL["ub"], COL["uc"]]]
    assert set(np.unique(levels)) <= {-1.0, 0.0, 1.0}


def test_slip_matches_feedforward():
    tr = run(get_scenario("const-120-100"), TUNED)
    tail = slice(-5000, None)
    # angle of the simulated rotor flux in the stationary frame
    ang = np.unwrap(tr["theta_e"] - np.arctan2(tr["lambda_qr"], tr["lambda_dr"]))
    w_flux = np.gradient(ang[tail], tr.sample_period).mean()
    w_slip = w_flux - 2 * tr["omega"][tail].mean()
    p = MachineParams()
    i_qs = 2 * p.l_r * tr["te"][tail].mean() / (3 * p.pole_pairs * p.l_m * 0.96)
    w_sl_ref = p.r_r * p.l_m * i_qs / (p.l_r * 0.96)
    assert w_slip == pytest.approx(w_sl_ref, rel=0.02)


def test_divergence_reports_time_and_partial_trace():
    cfg = DriveConfig(machine=MachineParams(l_ls=1e-6, l_lr=1e-6), dt=50e-6)
    with pytest.raises(SimulationDiverged) as info:
        run(get_scenario("const-120-100"), BASELINE, cfg, duration=0.1)
    assert 0 < info.value.time < 0.1
    assert len(info.value.trace) >= 1


def _synthetic(t, omega, ref, dt):
    n = len(t)
    data = np.zeros((n, len(COL)))
    data[:, COL["t"]] = t
    data[:, COL["omega"]] = omega
    data[:, COL["omega_ref"]] = ref
    return Trace(data, dt, dt, (0, 0, 0), 0, n * dt)


def test_metrics_perfect_tracking():
    dt = 1e-3
    t = np.arange(1000) * dt
    s = Scenario("flat", 1.0, ((0.0, 120.0),), ((0.0, 0.0),))
    m = compute_metrics(_synthetic(t, np.full_like(t, 120.0), np.full_like(t, 120.0), dt), s)
    assert m.iae == 0 and m.itae == 0 and m.overshoot == 0 and m.steady_state_error == 0


def test_metrics_unit_error():
    dt = 1e-4
    t = np.arange(10000) * dt
    s = Scenario("flat", 1.0, ((0.0, 1.0),), ((0.0, 0.0),))
    m = compute_metrics(_synthetic(t, np.zeros_like(t), np.ones_like(t), dt), s)
    assert m.iae == pytest.approx(1.0, abs=1e-3)
    assert m.itae == pytest.approx(0.5, abs=1e-3)


def test_metrics_sample_phase_invariance():
    s = Scenario("step", 1.0, ((0.0, 100.0),), ((0.0, 0.0),))
    dt = 1e-3
    resp = lambda t: 100 * (1 - np.exp(-t / 0.05) * (np.cos(40 * t) + 1.25 * np.sin(40 * t)))  # noqa: E731
    base = np.arange(1000) * dt
    shifted = base + 0.5 * dt
    m0 = compute_metrics(_synthetic(base, resp(base), np.full_like(base, 100.0), dt), s)
    m1 = compute_metrics(_synthetic(shifted, resp(shifted), np.full_like(base, 100.0), dt), s)
    for name in ("iae", "itae", "overshoot", "rise_time"):
        assert getattr(m1, name) == pytest.approx(getattr(m0, name), rel=0.01)


def test_metrics_short_trace():
    t = np.arange(5) * 1e-3
    with pytest.raises(MetricsError):
        compute_metrics(_synthetic(t, t, t, 1e-3), get_scenario("const-120-100"))


def test_overshoot_and_rise_time():
    dt = 1e-3
    t = np.arange(2000) * dt
    w = np.minimum(t / 0.5, 1.0) * 110.0
    w[t > 0.5] = 100.0
    w[(t > 0.5) & (t < 0.6)] = 110.0
    s = Scenario("step", 2.0, ((0.0, 100.0),), ((0.0, 0.0),))
    m = compute_metrics(_synthetic(t, w, np.full_like(t, 100.0), dt), s)
    assert m.overshoot == pytest.approx(10.0)
    assert m.rise_time == pytest.approx(0.8 * 100 / 110 * 0.5, abs=2 * dt)


def test_csv_format(tmp_path):
    tr = run(get_scenario("const-120-100"), BASELINE, duration=0.01)
    path = tmp_path / "trace.csv"
    tr.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(TRACE_COLUMNS)
    assert len(lines) == 1 + len(tr)
    assert all(len(line.split(",")) == 17 for line in lines)
    back = Trace.from_csv(path)
    np.testing.assert_allclose(back.data, tr.data[:, :17], rtol=1e-8, atol=1e-12)
    for field in lines[5].split(","):
        digits = field.lstrip("-").split("e")[0].replace(".", "").lstrip("0")
        assert len(digits) <= 9


def test_backends_bit_identical():
    if "compiled" not in sim.BACKENDS:
        pytest.skip("compiled kernel not built")
    s = get_scenario("var-speed-var-torque")
    a = run(s, TUNED, duration=0.02, backend="python")
    b = run(s, TUNED, duration=0.02, backend="compiled")
    np.testing.assert_array_equal(a.data, b.data)
    assert a.switch_events == b.switch_events


def test_step_size_insensitivity():
    s = get_scenario("const-120-100")
    coarse = run(s, TUNED)
    fine = run(s, TUNED, replace(DriveConfig(), dt=1e-6))
    assert fine["omega"][-1] == pytest.approx(coarse["omega"][-1], rel=1e-3)
