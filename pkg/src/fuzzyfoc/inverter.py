"""Ideal three-level neutral-point-clamped inverter.

Each leg is reduced to its pole level: +1 connects the phase terminal to the
positive rail (+v_dc/2 with respect to the DC midpoint), 0 to the midpoint,
-1 to the negative rail. The machine star point is isolated, so phase
voltages are pole voltages minus their common-mode average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

SQRT3 = math.sqrt(3.0)


class PoleLevel(IntEnum):
    NEG = -1
    ZERO = 0
    POS = 1


LEVELS = (PoleLevel.NEG, PoleLevel.ZERO, PoleLevel.POS)

# Device gating (S_i1, S_i2, S_i3, S_i4) realising each level.
GATING = {
    PoleLevel.POS: (True, True, False, False),
    PoleLevel.ZERO: (False, True, True, False),
    PoleLevel.NEG: (False, False, True, True),
}


@dataclass(frozen=True)
class InverterConfig:
    v_dc: float = 700.0

    def __post_init__(self):
        if not (math.isfinite(self.v_dc) and self.v_dc > 0):
            raise ValueError(f"v_dc must be finite and > 0, got {self.v_dc!r}")


def pole_voltage(level: int, cfg: InverterConfig) -> float:
    level = PoleLevel(level)
    return level * (0.5 * cfg.v_dc)


def pole_voltages(levels, cfg: InverterConfig):
    return tuple(pole_voltage(u, cfg) for u in levels)


def line_voltage(levels, cfg: InverterConfig):
    """Return ``(v_ab, v_bc, v_ca)``."""
    va, vb, vc = pole_voltages(levels, cfg)
    return va - vb, vb - vc, vc - va


def phase_voltages(levels, cfg: InverterConfig):
    """Return ``(v_an, v_bn, v_cn)`` for an isolated-neutral star load."""
    ua, ub, uc = (int(PoleLevel(u)) for u in levels)
    # integer arithmetic first so the three outputs sum to exactly zero
    scale = cfg.v_dc / 6.0
    return ((2 * ua - ub - uc) * scale,
            (2 * ub - ua - uc) * scale,
            (2 * uc - ua - ub) * scale)


def abc_to_stationary(f_a: float, f_b: float, f_c: float):
    """Amplitude-invariant Clarke transform, returned as ``(f_q, f_d)``."""
    f_q = (2.0 * f_a - f_b - f_c) / 3.0
    f_d = (f_c - f_b) / SQRT3
    return f_q, f_d


def stationary_to_abc(f_q: float, f_d: float):
    half_d = 0.5 * SQRT3 * f_d
    return f_q, -0.5 * f_q - half_d, -0.5 * f_q + half_d


@dataclass
class TransitionReport:
    illegal_phases: tuple[int, ...]
    switch_events: tuple[int, int, int]

    @property
    def legal(self) -> bool:
        return not self.illegal_phases


def audit_transition(prev, nxt) -> TransitionReport:
    """Check a single command update for direct +1 <-> -1 jumps."""
    illegal = []
    events = []
    for phase, (a, b) in enumerate(zip(prev, nxt)):
        a, b = int(a), int(b)
        events.append(int(a != b))
        if a * b == -1:
            illegal.append(phase)
    return TransitionReport(tuple(illegal), tuple(events))


@dataclass
class TransitionAuditor:
    """Accumulates switching events and illegal jumps over a run."""

    last: tuple[int, int, int] = (0, 0, 0)
    switch_events: list[int] = field(default_factory=lambda: [0, 0, 0])
    illegal_transitions: int = 0

    def observe(self, levels) -> TransitionReport:
        report = audit_transition(self.last, levels)
        for k, n in enumerate(report.switch_events):
            self.switch_events[k] += n
        self.illegal_transitions += len(report.illegal_phases)
        self.last = tuple(int(u) for u in levels)
        return report
