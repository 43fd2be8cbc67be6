"""Open-loop rigs shared by the unit and acceptance tests."""

import math

import numpy as np

from fuzzyfoc.hysteresis import HysteresisConfig, PhaseHccState, three_phase_step
from fuzzyfoc.inverter import InverterConfig, TransitionAuditor, phase_voltages
from fuzzyfoc.machine import MachineState, electromagnetic_torque, rotate_to_frame, step


def track_sinusoid(cfg: HysteresisConfig, dt=2e-6, t_end=0.04, amp=20.0, freq=50.0,
                   r=0.5, l=5e-3, v_dc=700.0):
    """Drive a three-phase star RL load through the hysteresis controller.

    Returns ``(errors[n, 3], slew, auditor)``; ``slew`` is the largest one-step
    current change.
    """
    inv = InverterConfig(v_dc)
    decay = math.exp(-r * dt / l)
    gain = (1.0 - decay) / r
    i = np.zeros(3)
    states = (PhaseHccState(),) * 3
    auditor = TransitionAuditor()
    errors = np.empty((int(round(t_end / dt)), 3))
    slew = 0.0
    shifts = (0.0, -2 * math.pi / 3, 2 * math.pi / 3)
    for k in range(errors.shape[0]):
        t = k * dt
        ref = np.array([amp * math.sin(2 * math.pi * freq * t + s) for s in shifts])
        e = ref - i
        errors[k] = e
        levels, states = three_phase_step(states, tuple(e), cfg)
        auditor.observe(levels)
        v = np.array(phase_voltages(levels, inv))
        i_next = i * decay + v * gain
        slew = max(slew, float(np.max(np.abs(i_next - i))))
        i = i_next
    return errors, slew, auditor


def open_loop(frame, params, dt=1e-5, t_end=0.3, v=120.0, w_e=2 * math.pi * 25):
    """Start the machine from rest on a balanced voltage set.

    ``frame`` is ``"stationary"`` or ``"sync"``; returns rotor speed and
    torque after each step.
    """
    s = MachineState()
    speeds, torques = [], []
    for k in range(int(round(t_end / dt))):
        th = w_e * k * dt
        vq, vd = v * math.cos(th), -v * math.sin(th)
        if frame == "sync":
            vq, vd = rotate_to_frame(vq, vd, th)
            s = step(s, vd, vq, w_e, 0.0, dt, params)
        else:
            s = step(s, vd, vq, 0.0, 0.0, dt, params)
        speeds.append(s.omega_r)
        torques.append(electromagnetic_torque(s, params))
    return np.array(speeds), np.array(torques)


def rms_relative(a, b):
    return float(np.sqrt(np.mean((a - b) ** 2)) / np.sqrt(np.mean(b ** 2)))
