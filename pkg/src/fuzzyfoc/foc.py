"""Indirect rotor-flux-oriented control: set-points, slip feedforward, angle."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .machine import MachineParams, wrap_angle

TWO_THIRDS_PI = 2.0 * math.pi / 3.0


class InvalidConfiguration(ValueError):
    pass


@dataclass(frozen=True)
class FocState:
    theta_e: float = 0.0
    lambda_r_ref: float = 0.96

    def __post_init__(self):
        if not (math.isfinite(self.lambda_r_ref) and self.lambda_r_ref > 0):
            raise InvalidConfiguration(
                f"rotor flux reference must be > 0, got {self.lambda_r_ref!r}")


def _check_flux(foc: FocState) -> float:
    if not foc.lambda_r_ref > 0:
        raise InvalidConfiguration("rotor flux reference must be > 0")
    return foc.lambda_r_ref


def current_references(torque_ref: float, foc: FocState, params: MachineParams):
    """Return ``(i_ds_ref, i_qs_ref)`` for a torque command at constant flux."""
    flux = _check_flux(foc)
    i_ds = flux / params.l_m
    i_qs = 2.0 * params.l_r * torque_ref / (3.0 * params.pole_pairs * params.l_m * flux)
    return i_ds, i_qs


def oriented_torque(i_qs: float, lambda_r: float, params: MachineParams) -> float:
    """Torque of a perfectly oriented machine: ``1.5 p (L_m/L_r) lambda_r i_qs``."""
    return 1.5 * params.pole_pairs * params.l_m / params.l_r * lambda_r * i_qs


def slip_frequency(i_qs_ref: float, foc: FocState, params: MachineParams) -> float:
    flux = _check_flux(foc)
    return params.r_r * params.l_m * i_qs_ref / (params.l_r * flux)


def advance_angle(foc: FocState, omega_r_electrical: float, omega_sl: float,
                  dt: float) -> FocState:
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    return replace(foc, theta_e=wrap_angle(foc.theta_e + (omega_r_electrical + omega_sl) * dt))


def dq_to_abc(i_ds_ref: float, i_qs_ref: float, theta_e: float):
    """Synchronous-frame set-points to phase currents (amplitude invariant)."""
    a = theta_e
    b = theta_e - TWO_THIRDS_PI
    c = theta_e + TWO_THIRDS_PI
    return (i_qs_ref * math.cos(a) + i_ds_ref * math.sin(a),
            i_qs_ref * math.cos(b) + i_ds_ref * math.sin(b),
            i_qs_ref * math.cos(c) + i_ds_ref * math.sin(c))
