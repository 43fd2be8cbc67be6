import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuzzyfoc.foc import (FocState, InvalidConfiguration, advance_angle, current_references,
                          dq_to_abc, oriented_torque, slip_frequency)
from fuzzyfoc.machine import MachineParams

P = MachineParams()
FOC = FocState()


def test_magnetizing_current():
    i_ds, i_qs = current_references(0.0, FOC, P)
    assert i_ds == pytest.approx(27.67, abs=5e-3)
    assert i_qs == 0.0


def test_torque_current_round_trip():
    _, i_qs = current_references(100.0, FOC, P)
    assert i_qs == pytest.approx(35.52, abs=5e-3)
    assert oriented_torque(i_qs, FOC.lambda_r_ref, P) == pytest.approx(100.0, rel=1e-12)


def test_slip():
    assert slip_frequency(0.0, FOC, P) == 0.0
    assert slip_frequency(35.52, FOC, P) == pytest.approx(8.246, abs=5e-4)
    assert slip_frequency(71.04, FOC, P) == pytest.approx(2 * slip_frequency(35.52, FOC, P))


def test_zero_flux_is_invalid():
    with pytest.raises(InvalidConfiguration):
        FocState(lambda_r_ref=0.0)


def test_angle_advance():
    assert advance_angle(FocState(1.0), 0.0, 0.0, 1e-4).theta_e == 1.0
    s = FocState()
    for _ in range(1000):
        s = advance_angle(s, 2 * math.pi / 1e-4 / 1000, 0.0, 1e-4)
    assert min(s.theta_e, 2 * math.pi - s.theta_e) < 1e-9
    s = FocState()
    for _ in range(100):
        s = advance_angle(s, 90.0, 10.0, 1e-4)
    assert s.theta_e == pytest.approx(1.0, rel=1e-12)


def test_dq_to_abc_zero():
    assert dq_to_abc(0.0, 0.0, 1.0) == (0.0, 0.0, 0.0)


@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(-10, 10))
def test_dq_to_abc_balanced(i_ds, i_qs, theta):
    assert sum(dq_to_abc(i_ds, i_qs, theta)) == pytest.approx(0.0, abs=1e-9)


def test_dq_to_abc_sweep():
    theta = np.linspace(0, 2 * math.pi, 3601)[:-1]
    i_ds, i_qs = 27.67, 35.52
    abc = np.array([dq_to_abc(i_ds, i_qs, t) for t in theta])
    amp = math.hypot(i_ds, i_qs)
    np.testing.assert_allclose(abc.max(axis=0), amp, rtol=1e-5)
    phi = math.atan2(i_ds, i_qs)
    for k, shift in enumerate((0.0, -2 * math.pi / 3, 2 * math.pi / 3)):
        np.testing.assert_allclose(abc[:, k], amp * np.cos(theta + shift - phi), atol=1e-9)
