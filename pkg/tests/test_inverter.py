import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuzzyfoc.inverter import (GATING, LEVELS, InverterConfig, PoleLevel, TransitionAuditor,
                               abc_to_stationary, audit_transition, line_voltage, phase_voltages,
                               pole_voltage, stationary_to_abc)

ALL_STATES = list(itertools.product(LEVELS, repeat=3))
v_dc = st.floats(1.0, 5000.0)


def test_pole_voltage_table():
    cfg = InverterConfig(600.0)
    assert pole_voltage(PoleLevel.POS, cfg) == 300.0
    assert pole_voltage(PoleLevel.ZERO, cfg) == 0.0
    assert pole_voltage(PoleLevel.NEG, cfg) == -300.0


def test_gating_uses_two_adjacent_devices():
    for level, gates in GATING.items():
        assert sum(gates) == 2
        on = [k for k, g in enumerate(gates) if g]
        assert on[1] - on[0] == 1
    assert GATING[PoleLevel.POS][0] and GATING[PoleLevel.NEG][3]


@given(v_dc)
def test_pole_table_any_dc_link(v):
    cfg = InverterConfig(v)
    assert [pole_voltage(u, cfg) for u in LEVELS] == [-v / 2, 0.0, v / 2]


def test_line_voltages():
    cfg = InverterConfig(600.0)
    assert line_voltage((1, -1, 0), cfg)[0] == 600.0
    assert line_voltage((1, 1, 0), cfg)[0] == 0.0
    values = {line_voltage((a, b, 0), cfg)[0] for a in LEVELS for b in LEVELS}
    assert values == {-600.0, -300.0, 0.0, 300.0, 600.0}


def test_phase_voltage_examples():
    cfg = InverterConfig(600.0)
    assert phase_voltages((1, -1, -1), cfg) == (400.0, -200.0, -200.0)
    assert phase_voltages((0, 0, 0), cfg) == (0.0, 0.0, 0.0)
    assert phase_voltages((1, 1, 1), cfg) == (0.0, 0.0, 0.0)


@given(v_dc)
def test_phase_voltages_sum_to_zero_exhaustive(v):
    cfg = InverterConfig(v)
    for levels in ALL_STATES:
        assert sum(phase_voltages(levels, cfg)) == 0.0
        assert max(abs(x) for x in line_voltage(levels, cfg)) <= v
        assert max(abs(pole_voltage(u, cfg)) for u in levels) <= v / 2


def test_invalid_dc_link():
    with pytest.raises(ValueError):
        InverterConfig(0.0)


@given(st.floats(-100, 100), st.floats(-100, 100))
def test_clarke_round_trip(q, d):
    a, b, c = stationary_to_abc(q, d)
    assert a + b + c == pytest.approx(0.0, abs=1e-9)
    assert abc_to_stationary(a, b, c) == pytest.approx((q, d), abs=1e-9)


def test_audit_examples():
    assert audit_transition((1, 0, 0), (-1, 0, 0)).illegal_phases == (0,)
    assert audit_transition((1, 0, 0), (0, 0, 0)).legal
    report = audit_transition((1, 0, -1), (1, 0, -1))
    assert report.legal and report.switch_events == (0, 0, 0)


def test_auditor_counts():
    aud = TransitionAuditor()
    for levels in [(1, 0, 0), (0, 0, 0), (-1, 1, 0), (1, 1, 0)]:
        aud.observe(levels)
    assert aud.switch_events == [4, 1, 0]
    assert aud.illegal_transitions == 1
