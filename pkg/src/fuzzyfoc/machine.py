"""Induction machine model in an arbitrary rotating q-d reference frame.

State variables are the four flux linkages plus electrical rotor speed and
angle. Currents are recovered from fluxes by inverting the per-axis
inductance matrix. The frame convention is the q-d one used throughout the
package: a complex space vector is ``f = f_q - j*f_d`` and a frame rotating at
``omega`` sees

    v_qs = R_s i_qs + d(lambda_qs)/dt + omega * lambda_ds
    v_ds = R_s i_ds + d(lambda_ds)/dt - omega * lambda_qs
    0    = R_r i_qr + d(lambda_qr)/dt + (omega - omega_r) * lambda_dr
    0    = R_r i_dr + d(lambda_dr)/dt - (omega - omega_r) * lambda_qr

Rotor speed in the electrical equations is electrical speed; the mechanical
equation integrates mechanical speed ``omega_r / pole_pairs``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

TWO_PI = 2.0 * math.pi


class ParameterError(ValueError):
    """Raised for physically invalid machine parameters."""


class DivergenceError(ArithmeticError):
    """Raised when the integrated state stops being finite."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


@dataclass(frozen=True)
class MachineParams:
    r_s: float = 0.087
    r_r: float = 0.228
    l_ls: float = 0.8e-3
    l_lr: float = 0.8e-3
    l_m: float = 34.7e-3
    pole_pairs: int = 2
    inertia: float = 1.662
    friction: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("r_s", "r_r", "l_ls", "l_lr", "l_m", "inertia"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be finite and > 0, got {value!r}")
        if int(self.pole_pairs) != self.pole_pairs or self.pole_pairs < 1:
            raise ParameterError(f"pole_pairs must be an integer >= 1, got {self.pole_pairs!r}")
        if not (math.isfinite(self.friction) and self.friction >= 0):
            raise ParameterError(f"friction must be finite and >= 0, got {self.friction!r}")
        if not self.determinant > 0:
            raise ParameterError("inductance matrix is singular (l_s*l_r <= l_m**2)")

    @property
    def l_s(self) -> float:
        return self.l_ls + self.l_m

    @property
    def l_r(self) -> float:
        return self.l_lr + self.l_m

    @property
    def determinant(self) -> float:
        return self.l_s * self.l_r - self.l_m * self.l_m

    @property
    def sigma(self) -> float:
        """Total leakage coefficient."""
        return 1.0 - self.l_m * self.l_m / (self.l_s * self.l_r)


@dataclass(frozen=True)
class MachineState:
    lambda_ds: float = 0.0
    lambda_qs: float = 0.0
    lambda_dr: float = 0.0
    lambda_qr: float = 0.0
    omega_r: float = 0.0  # electrical rad/s
    theta_r: float = 0.0  # electrical rad, wrapped to [0, 2*pi)

    def omega_mech(self, params: MachineParams) -> float:
        return self.omega_r / params.pole_pairs

    def as_tuple(self) -> tuple[float, ...]:
        return (self.lambda_ds, self.lambda_qs, self.lambda_dr, self.lambda_qr,
                self.omega_r, self.theta_r)


def wrap_angle(theta: float) -> float:
    theta = math.fmod(theta, TWO_PI)
    if theta < 0.0:
        theta += TWO_PI
    if theta >= TWO_PI:  # fmod of a tiny negative can round up to 2*pi
        theta = 0.0
    return theta


def currents_from_fluxes(state: MachineState, params: MachineParams):
    """Return ``(i_ds, i_qs, i_dr, i_qr)`` by inverting the flux equations."""
    det = params.determinant
    if not det > 0:
        raise ParameterError("inductance matrix is singular (l_s*l_r <= l_m**2)")
    l_s, l_r, l_m = params.l_s, params.l_r, params.l_m
    i_ds = (l_r * state.lambda_ds - l_m * state.lambda_dr) / det
    i_qs = (l_r * state.lambda_qs - l_m * state.lambda_qr) / det
    i_dr = (l_s * state.lambda_dr - l_m * state.lambda_ds) / det
    i_qr = (l_s * state.lambda_qr - l_m * state.lambda_qs) / det
    return i_ds, i_qs, i_dr, i_qr


def fluxes_from_currents(i_ds, i_qs, i_dr, i_qr, params: MachineParams):
    l_s, l_r, l_m = params.l_s, params.l_r, params.l_m
    return (l_s * i_ds + l_m * i_dr,
            l_s * i_qs + l_m * i_qr,
            l_r * i_dr + l_m * i_ds,
            l_r * i_qr + l_m * i_qs)


def torque_from_currents(i_ds, i_qs, i_dr, i_qr, params: MachineParams) -> float:
    return 1.5 * params.pole_pairs * params.l_m * (i_qs * i_dr - i_ds * i_qr)


def electromagnetic_torque(state: MachineState, params: MachineParams) -> float:
    return torque_from_currents(*currents_from_fluxes(state, params), params)


def derivatives(y, v_ds, v_qs, omega_frame, load_torque, params: MachineParams):
    """Time derivative of ``y = (lambda_ds, lambda_qs, lambda_dr, lambda_qr, omega_r)``."""
    lds, lqs, ldr, lqr, wr = y
    det = params.determinant
    l_s, l_r, l_m = params.l_s, params.l_r, params.l_m
    i_ds = (l_r * lds - l_m * ldr) / det
    i_qs = (l_r * lqs - l_m * lqr) / det
    i_dr = (l_s * ldr - l_m * lds) / det
    i_qr = (l_s * lqr - l_m * lqs) / det
    slip = omega_frame - wr
    p = params.pole_pairs
    te = 1.5 * p * l_m * (i_qs * i_dr - i_ds * i_qr)
    w_mech = wr / p
    dw_mech = (te - load_torque - params.friction * w_mech) / params.inertia
    return (
        v_ds - params.r_s * i_ds + omega_frame * lqs,
        v_qs - params.r_s * i_qs - omega_frame * lds,
        -params.r_r * i_dr + slip * lqr,
        -params.r_r * i_qr - slip * ldr,
        p * dw_mech,
    )


def rk4_advance(y, v_ds, v_qs, omega_frame, load_torque, dt, params):
    """One classical RK4 step with zero-order-hold inputs."""
    k1 = derivatives(y, v_ds, v_qs, omega_frame, load_torque, params)
    y2 = tuple(a + 0.5 * dt * b for a, b in zip(y, k1))
    k2 = derivatives(y2, v_ds, v_qs, omega_frame, load_torque, params)
    y3 = tuple(a + 0.5 * dt * b for a, b in zip(y, k2))
    k3 = derivatives(y3, v_ds, v_qs, omega_frame, load_torque, params)
    y4 = tuple(a + dt * b for a, b in zip(y, k3))
    k4 = derivatives(y4, v_ds, v_qs, omega_frame, load_torque, params)
    return tuple(a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
                 for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))


def step(state: MachineState, v_ds: float, v_qs: float, omega_frame: float,
         load_torque: float, dt: float, params: MachineParams,
         time: float | None = None) -> MachineState:
    """Advance the machine by one fixed step ``dt``.

    ``v_ds``/``v_qs`` are expressed in the frame rotating at ``omega_frame``
    and held constant over the step. The rotor angle advances with the
    trapezoidal average of the start and end rotor speeds.
    """
    if not (dt > 0):
        raise ValueError(f"dt must be > 0, got {dt!r}")
    y0 = state.as_tuple()[:5]
    y1 = rk4_advance(y0, v_ds, v_qs, omega_frame, load_torque, dt, params)
    if not all(math.isfinite(v) for v in y1):
        raise DivergenceError("machine state became non-finite", time)
    theta = wrap_angle(state.theta_r + 0.5 * (y0[4] + y1[4]) * dt)
    return MachineState(*y1, theta)


def magnetic_energy(state: MachineState, params: MachineParams) -> float:
    """Stored magnetic energy (amplitude-invariant scaling, factor 3/2)."""
    i_ds, i_qs, i_dr, i_qr = currents_from_fluxes(state, params)
    return 0.75 * (state.lambda_ds * i_ds + state.lambda_qs * i_qs
                   + state.lambda_dr * i_dr + state.lambda_qr * i_qr)


def kinetic_energy(state: MachineState, params: MachineParams) -> float:
    w = state.omega_mech(params)
    return 0.5 * params.inertia * w * w


def rotate_to_frame(f_q: float, f_d: float, theta: float):
    """Stationary q-d -> frame at angle ``theta``."""
    c, s = math.cos(theta), math.sin(theta)
    return f_q * c - f_d * s, f_q * s + f_d * c


def rotate_from_frame(f_q: float, f_d: float, theta: float):
    """Frame at angle ``theta`` -> stationary q-d."""
    c, s = math.cos(theta), math.sin(theta)
    return f_q * c + f_d * s, -f_q * s + f_d * c


def in_frame(state: MachineState, theta: float) -> MachineState:
    """Re-express a stationary-frame state in the frame at angle ``theta``."""
    qs, ds = rotate_to_frame(state.lambda_qs, state.lambda_ds, theta)
    qr, dr = rotate_to_frame(state.lambda_qr, state.lambda_dr, theta)
    return replace(state, lambda_ds=ds, lambda_qs=qs, lambda_dr=dr, lambda_qr=qr)
