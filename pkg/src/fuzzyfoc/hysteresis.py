"""Three-level hysteresis current control with a dead zone.

A phase tracks its reference either in the lower band (states 0 and +1) or
in the upper band (states 0 and -1). The trend of the error (``ce``) decides
the output inside the band; outside it the error magnitude alone decides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .inverter import PoleLevel


@dataclass(frozen=True)
class HysteresisConfig:
    band: float = 0.5
    dead_zone: float = 0.05

    def __post_init__(self):
        if not (math.isfinite(self.band) and math.isfinite(self.dead_zone)):
            raise ValueError("hysteresis band and dead zone must be finite")
        if not 0.0 < self.dead_zone < self.band:
            raise ValueError(
                f"need 0 < dead_zone < band, got dead_zone={self.dead_zone}, band={self.band}")


@dataclass(frozen=True)
class PhaseHccState:
    last_output: int = 0
    last_error: float = 0.0


def switching_law(e: float, ce: float, previous: int, h: float, delta: float) -> int:
    """Band logic for one phase; ``previous`` is held where no clause applies."""
    if e > 0.0:
        if e >= h:
            u = 1
        elif e <= delta:
            u = 0
        elif ce > 0.0:
            u = 0
        elif ce < 0.0:
            u = 1
        else:
            u = previous
    elif e < 0.0:
        if e <= -h:
            u = -1
        elif e >= -delta:
            u = 0
        elif ce < 0.0:
            u = 0
        elif ce > 0.0:
            u = -1
        else:
            u = previous
    else:
        u = 0
    # never jump straight across the DC link: pass through the midpoint
    if u * previous == -1:
        u = 0
    return u


def phase_step(state: PhaseHccState, error: float, cfg: HysteresisConfig):
    ce = error - state.last_error
    u = switching_law(error, ce, state.last_output, cfg.band, cfg.dead_zone)
    return PoleLevel(u), PhaseHccState(u, error)


def three_phase_step(states, errors, cfg: HysteresisConfig):
    out = [phase_step(s, e, cfg) for s, e in zip(states, errors)]
    return tuple(u for u, _ in out), tuple(s for _, s in out)
