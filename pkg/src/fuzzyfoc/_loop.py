"""Pure-Python closed-loop drive simulation.

This is the fallback for the compiled ``_kernel`` extension and the
reference it is checked against. Both follow the same arithmetic order so
that, on the same platform, they produce identical traces.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import hysteresis
from .foc import FocState, current_references, dq_to_abc, slip_frequency
from .fuzzy import FuzzyController, FuzzyParams
from .inverter import SQRT3
from .machine import TWO_PI, rk4_advance

N_COLUMNS = 18  # 17 exported columns + synchronous angle


class _Machine(NamedTuple):
    r_s: float
    r_r: float
    l_s: float
    l_r: float
    l_m: float
    pole_pairs: float
    inertia: float
    friction: float
    determinant: float


def _machine(mp) -> _Machine:
    r_s, r_r, l_s, l_r, l_m, p, inertia, friction = (float(v) for v in mp)
    return _Machine(r_s, r_r, l_s, l_r, l_m, p, inertia, friction, l_s * l_r - l_m * l_m)


def _wrap(theta: float) -> float:
    theta = math.fmod(theta, TWO_PI)
    if theta < 0.0:
        theta += TWO_PI
    if theta >= TWO_PI:
        theta = 0.0
    return theta


def piecewise_linear(t: float, ts, vs, cursor: int) -> tuple[float, int]:
    n = len(ts)
    while cursor < n - 2 and t >= ts[cursor + 1]:
        cursor += 1
    if t <= ts[0]:
        return vs[0], cursor
    if t >= ts[n - 1]:
        return vs[n - 1], cursor
    t0, t1 = ts[cursor], ts[cursor + 1]
    return vs[cursor] + (vs[cursor + 1] - vs[cursor]) * (t - t0) / (t1 - t0), cursor


def piecewise_constant(t: float, ts, vs, cursor: int) -> tuple[float, int]:
    n = len(ts)
    while cursor < n - 1 and t >= ts[cursor + 1]:
        cursor += 1
    return vs[cursor], cursor


def closed_loop(mp, fp, ctl, hcc, v_dc, dt, n_steps, speed_decim, hcc_decim,
                trace_decim, sp_t, sp_v, ld_t, ld_v, init):
    """Run the drive for ``n_steps`` integration steps.

    Returns ``(rows, switch_counts, illegal, fail_step)``; ``fail_step`` is -1
    on success, otherwise the step at which the state stopped being finite
    (rows are then filled up to that point).
    """
    m = _machine(mp)
    p = m.pole_pairs
    params = FuzzyParams(*(float(v) for v in fp))
    torque_limit, lambda_ref = float(ctl[0]), float(ctl[1])
    controller = FuzzyController(params, torque_limit)
    h, delta = float(hcc[0]), float(hcc[1])
    sp_t = [float(v) for v in sp_t]
    sp_v = [float(v) for v in sp_v]
    ld_t = [float(v) for v in ld_t]
    ld_v = [float(v) for v in ld_v]
    dt = float(dt)
    v_sixth = float(v_dc) / 6.0
    v_half = 0.5 * float(v_dc)
    v_d_gain = 3.0 * v_sixth / SQRT3
    foc = FocState(0.0, lambda_ref)

    lds, lqs, ldr, lqr, wr, theta_e, u_acc, last_e = (float(v) for v in init)
    y = (lds, lqs, ldr, lqr, wr)

    n_rows = (n_steps + trace_decim - 1) // trace_decim
    rows = np.zeros((n_rows, N_COLUMNS))
    switches = [0, 0, 0]
    illegal = 0
    levels = [0, 0, 0]
    hcc_err = [0.0, 0.0, 0.0]

    ids_ref, iqs_ref = current_references(u_acc, foc, m)
    w_slip = slip_frequency(iqs_ref, foc, m)

    sp_cur = 0
    ld_cur = 0
    row = 0
    fail = -1
    for k in range(n_steps):
        t = k * dt
        w_ref, sp_cur = piecewise_linear(t, sp_t, sp_v, sp_cur)
        t_load, ld_cur = piecewise_constant(t, ld_t, ld_v, ld_cur)
        lds, lqs, ldr, lqr, wr = y
        det = m.determinant
        i_ds = (m.l_r * lds - m.l_m * ldr) / det
        i_qs = (m.l_r * lqs - m.l_m * lqr) / det
        i_dr = (m.l_s * ldr - m.l_m * lds) / det
        i_qr = (m.l_s * lqr - m.l_m * lqs) / det
        half_d = 0.5 * SQRT3 * i_ds
        i_abc = (i_qs, -0.5 * i_qs - half_d, -0.5 * i_qs + half_d)
        w_mech = wr / p

        if k % speed_decim == 0:
            e = w_ref - w_mech
            du = controller.increment(e, e - last_e)
            last_e = e
            u_acc = u_acc + params.k3 * du
            u_acc = min(torque_limit, max(-torque_limit, u_acc))
            ids_ref, iqs_ref = current_references(u_acc, foc, m)
            w_slip = slip_frequency(iqs_ref, foc, m)

        ref_abc = dq_to_abc(ids_ref, iqs_ref, theta_e)

        if k % hcc_decim == 0:
            for ph in range(3):
                err = ref_abc[ph] - i_abc[ph]
                ce = err - hcc_err[ph]
                u = hysteresis.switching_law(err, ce, levels[ph], h, delta)
                hcc_err[ph] = err
                if u != levels[ph]:
                    switches[ph] += 1
                    if u * levels[ph] == -1:
                        illegal += 1
                    levels[ph] = u

        if k % trace_decim == 0:
            te = 1.5 * p * m.l_m * (i_qs * i_dr - i_ds * i_qr)
            c, s = math.cos(theta_e), math.sin(theta_e)
            rows[row] = (
                t, w_ref, w_mech, te, t_load,
                i_abc[0], i_abc[1], i_abc[2],
                ref_abc[0], ref_abc[1], ref_abc[2],
                (levels[0] - levels[1]) * v_half,
                lqr * s + ldr * c,
                lqr * c - ldr * s,
                levels[0], levels[1], levels[2],
                theta_e,
            )
            row += 1

        ua, ub, uc = levels
        v_q = (2 * ua - ub - uc) * v_sixth
        v_d = (uc - ub) * v_d_gain
        y = rk4_advance(y, v_d, v_q, 0.0, t_load, dt, m)
        if not (math.isfinite(y[0]) and math.isfinite(y[1]) and math.isfinite(y[2])
                and math.isfinite(y[3]) and math.isfinite(y[4])):
            fail = k
            break
        theta_e = _wrap(theta_e + (wr + w_slip) * dt)

    return rows[:row], np.array(switches, dtype=np.int64), illegal, fail
