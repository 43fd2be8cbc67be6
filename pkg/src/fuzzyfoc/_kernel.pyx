# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closed-loop drive simulation.

Mirrors ``fuzzyfoc._loop.closed_loop`` operation for operation; the GIL is
released for the whole time-stepping loop so independent runs can share a
thread pool.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, fmod, isfinite, INFINITY, M_PI, sqrt

cnp.import_array()

cdef enum:
    N_COLUMNS = 18
    GRID_HALF = 1000
    GRID_N = 2001

cdef double TWO_PI = 2.0 * M_PI
cdef double TWO_THIRDS_PI = 2.0 * M_PI / 3.0


cdef struct Machine:
    double r_s, r_r, l_s, l_r, l_m, p, inertia, friction, det


cdef inline double _wrap(double theta) noexcept nogil:
    theta = fmod(theta, TWO_PI)
    if theta < 0.0:
        theta += TWO_PI
    if theta >= TWO_PI:
        theta = 0.0
    return theta


cdef inline double _min(double a, double b) noexcept nogil:
    # Python's min(a, b): a unless b < a
    return b if b < a else a


cdef inline double _max(double a, double b) noexcept nogil:
    return b if b > a else a


cdef inline double _triangle(double x, double left, double peak, double right) noexcept nogil:
    if x == peak:
        return 1.0
    if left < x and x < peak:
        return (x - left) / (peak - left)
    if peak < x and x < right:
        return (right - x) / (right - peak)
    return 0.0


cdef inline void _fuzzify(double x, double p1, double p2, double* out) noexcept nogil:
    cdef double c[7]
    cdef int j
    cdef double left, right
    c[0] = -1.0; c[1] = -p2; c[2] = -p1; c[3] = 0.0; c[4] = p1; c[5] = p2; c[6] = 1.0
    for j in range(7):
        if j == 0 and x <= -1.0:
            out[j] = 1.0
        elif j == 6 and x >= 1.0:
            out[j] = 1.0
        else:
            left = c[j - 1] if j > 0 else -INFINITY
            right = c[j + 1] if j < 6 else INFINITY
            out[j] = _triangle(x, left, c[j], right)


cdef inline double _normalize(double value, double gain) noexcept nogil:
    return _min(1.0, _max(-1.0, value * gain))


# rows: change of error, columns: error, entries: output label index (NB=0..PB=6)
cdef int RULES[7][7]
_table = (
    (0, 0, 0, 0, 1, 2, 3),
    (0, 0, 0, 1, 2, 3, 4),
    (0, 0, 1, 2, 3, 4, 5),
    (0, 1, 2, 3, 4, 5, 6),
    (1, 2, 3, 4, 5, 6, 6),
    (2, 3, 4, 5, 6, 6, 6),
    (3, 4, 5, 6, 6, 6, 6),
)
for _i in range(7):
    for _j in range(7):
        RULES[_i][_j] = _table[_i][_j]


def rule_indices():
    """The compiled rule table as nested lists, for consistency checks."""
    return [[RULES[i][j] for j in range(7)] for i in range(7)]


cdef double _increment(double e, double ce, const double* fp, const double* out_grid,
                       double* agg) noexcept nogil:
    cdef double de[7]
    cdef double dce[7]
    cdef double deg[7]
    cdef double mu_ce, w, den, num, pos, neg
    cdef int i, j, k, first
    _fuzzify(_normalize(e, fp[0]), fp[3], fp[4], de)
    _fuzzify(_normalize(ce, fp[1]), fp[5], fp[6], dce)
    for j in range(7):
        deg[j] = 0.0
    for i in range(7):
        mu_ce = dce[i]
        if mu_ce <= 0.0:
            continue
        for j in range(7):
            w = _min(de[j], mu_ce)
            k = RULES[i][j]
            if w > deg[k]:
                deg[k] = w
    first = 1
    for j in range(7):
        if deg[j] > 0.0:
            if first:
                for k in range(GRID_N):
                    agg[k] = _min(out_grid[j * GRID_N + k], deg[j])
                first = 0
            else:
                for k in range(GRID_N):
                    agg[k] = _max(agg[k], _min(out_grid[j * GRID_N + k], deg[j]))
    if first:
        return 0.0
    den = 0.0
    num = 0.0
    for i in range(GRID_HALF):
        pos = agg[GRID_HALF + 1 + i]
        neg = agg[GRID_HALF - 1 - i]
        den = den + (pos + neg)
        num = num + (<double>(GRID_HALF + 1 + i - GRID_HALF) / <double>GRID_HALF) * (pos - neg)
    den = agg[GRID_HALF] + den
    if den <= 0.0:
        return 0.0
    return num / den


cdef inline void _derivs(const Machine* m, const double* y, double v_ds, double v_qs,
                         double omega_frame, double load, double* d) noexcept nogil:
    cdef double i_ds = (m.l_r * y[0] - m.l_m * y[2]) / m.det
    cdef double i_qs = (m.l_r * y[1] - m.l_m * y[3]) / m.det
    cdef double i_dr = (m.l_s * y[2] - m.l_m * y[0]) / m.det
    cdef double i_qr = (m.l_s * y[3] - m.l_m * y[1]) / m.det
    cdef double slip = omega_frame - y[4]
    cdef double te = 1.5 * m.p * m.l_m * (i_qs * i_dr - i_ds * i_qr)
    cdef double w_mech = y[4] / m.p
    cdef double dw_mech = (te - load - m.friction * w_mech) / m.inertia
    d[0] = v_ds - m.r_s * i_ds + omega_frame * y[1]
    d[1] = v_qs - m.r_s * i_qs - omega_frame * y[0]
    d[2] = -m.r_r * i_dr + slip * y[3]
    d[3] = -m.r_r * i_qr - slip * y[2]
    d[4] = m.p * dw_mech


cdef inline void _rk4(const Machine* m, double* y, double v_ds, double v_qs,
                      double omega_frame, double load, double dt) noexcept nogil:
    cdef double k1[5]
    cdef double k2[5]
    cdef double k3[5]
    cdef double k4[5]
    cdef double tmp[5]
    cdef int i
    _derivs(m, y, v_ds, v_qs, omega_frame, load, k1)
    for i in range(5):
        tmp[i] = y[i] + 0.5 * dt * k1[i]
    _derivs(m, tmp, v_ds, v_qs, omega_frame, load, k2)
    for i in range(5):
        tmp[i] = y[i] + 0.5 * dt * k2[i]
    _derivs(m, tmp, v_ds, v_qs, omega_frame, load, k3)
    for i in range(5):
        tmp[i] = y[i] + dt * k3[i]
    _derivs(m, tmp, v_ds, v_qs, omega_frame, load, k4)
    for i in range(5):
        y[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


cdef inline int _switching_law(double e, double ce, int previous, double h,
                               double delta) noexcept nogil:
    cdef int u
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
    if u * previous == -1:
        u = 0
    return u


cdef inline double _pwl(double t, const double* ts, const double* vs, Py_ssize_t n,
                        Py_ssize_t* cursor) noexcept nogil:
    while cursor[0] < n - 2 and t >= ts[cursor[0] + 1]:
        cursor[0] += 1
    if t <= ts[0]:
        return vs[0]
    if t >= ts[n - 1]:
        return vs[n - 1]
    cdef Py_ssize_t c = cursor[0]
    return vs[c] + (vs[c + 1] - vs[c]) * (t - ts[c]) / (ts[c + 1] - ts[c])


cdef inline double _pwc(double t, const double* ts, const double* vs, Py_ssize_t n,
                        Py_ssize_t* cursor) noexcept nogil:
    while cursor[0] < n - 1 and t >= ts[cursor[0] + 1]:
        cursor[0] += 1
    return vs[cursor[0]]


def closed_loop(mp, fp, ctl, hcc, double v_dc, double dt, Py_ssize_t n_steps,
                Py_ssize_t speed_decim, Py_ssize_t hcc_decim, Py_ssize_t trace_decim,
                sp_t, sp_v, ld_t, ld_v, init):
    """Compiled twin of ``fuzzyfoc._loop.closed_loop`` (same signature and result)."""
    cdef double[::1] mpv = np.ascontiguousarray(mp, dtype=np.float64)
    cdef double[::1] fpv = np.ascontiguousarray(fp, dtype=np.float64)
    cdef double[::1] ctlv = np.ascontiguousarray(ctl, dtype=np.float64)
    cdef double[::1] hccv = np.ascontiguousarray(hcc, dtype=np.float64)
    cdef double[::1] spt = np.ascontiguousarray(sp_t, dtype=np.float64)
    cdef double[::1] spv = np.ascontiguousarray(sp_v, dtype=np.float64)
    cdef double[::1] ldt = np.ascontiguousarray(ld_t, dtype=np.float64)
    cdef double[::1] ldv = np.ascontiguousarray(ld_v, dtype=np.float64)
    cdef double[::1] iv = np.ascontiguousarray(init, dtype=np.float64)
    if spt.shape[0] < 1 or ldt.shape[0] < 1:
        raise ValueError("profiles need at least one breakpoint")
    if speed_decim < 1 or hcc_decim < 1 or trace_decim < 1:
        raise ValueError("decimation factors must be >= 1")

    cdef Machine m
    m.r_s = mpv[0]; m.r_r = mpv[1]; m.l_s = mpv[2]; m.l_r = mpv[3]; m.l_m = mpv[4]
    m.p = mpv[5]; m.inertia = mpv[6]; m.friction = mpv[7]
    m.det = m.l_s * m.l_r - m.l_m * m.l_m

    cdef double torque_limit = ctlv[0]
    cdef double lambda_ref = ctlv[1]
    cdef double h = hccv[0]
    cdef double delta = hccv[1]
    cdef double v_sixth = v_dc / 6.0
    cdef double v_half = 0.5 * v_dc
    cdef double v_d_gain = 3.0 * v_sixth / sqrt(3.0)
    cdef double sqrt3 = sqrt(3.0)

    # output-set memberships on the defuzzification grid
    cdef double[:, ::1] out_grid = np.empty((7, GRID_N))
    cdef double[::1] agg = np.empty(GRID_N)
    cdef double deg7[7]
    cdef Py_ssize_t g, j
    for g in range(GRID_N):
        _fuzzify(<double>(g - GRID_HALF) / <double>GRID_HALF, fpv[7], fpv[8], deg7)
        for j in range(7):
            out_grid[j, g] = deg7[j]

    cdef Py_ssize_t n_rows = (n_steps + trace_decim - 1) // trace_decim
    rows_arr = np.zeros((n_rows, N_COLUMNS))
    cdef double[:, ::1] rows = rows_arr
    cdef long long switches[3]
    switches[0] = 0; switches[1] = 0; switches[2] = 0
    cdef long long illegal = 0
    cdef int levels[3]
    levels[0] = 0; levels[1] = 0; levels[2] = 0
    cdef double hcc_err[3]
    hcc_err[0] = 0.0; hcc_err[1] = 0.0; hcc_err[2] = 0.0

    cdef double y[5]
    y[0] = iv[0]; y[1] = iv[1]; y[2] = iv[2]; y[3] = iv[3]; y[4] = iv[4]
    cdef double theta_e = iv[5]
    cdef double u_acc = iv[6]
    cdef double last_e = iv[7]

    cdef double ids_ref = lambda_ref / m.l_m
    cdef double iqs_ref = 2.0 * m.l_r * u_acc / (3.0 * m.p * m.l_m * lambda_ref)
    cdef double w_slip = m.r_r * m.l_m * iqs_ref / (m.l_r * lambda_ref)

    cdef Py_ssize_t sp_cur = 0, ld_cur = 0, row = 0, fail = -1, k
    cdef Py_ssize_t nsp = spt.shape[0], nld = ldt.shape[0]
    cdef double t, w_ref, t_load, wr, i_ds, i_qs, i_dr, i_qr, half_d, w_mech
    cdef double e, du, err, ce, te, c, s, v_q, v_d
    cdef double i_abc[3]
    cdef double ref_abc[3]
    cdef int ph, u, ua, ub, uc
    cdef const double* fptr = &fpv[0]
    cdef const double* gptr = &out_grid[0, 0]
    cdef double* aptr = &agg[0]

    with nogil:
        for k in range(n_steps):
            t = k * dt
            w_ref = _pwl(t, &spt[0], &spv[0], nsp, &sp_cur)
            t_load = _pwc(t, &ldt[0], &ldv[0], nld, &ld_cur)
            wr = y[4]
            i_ds = (m.l_r * y[0] - m.l_m * y[2]) / m.det
            i_qs = (m.l_r * y[1] - m.l_m * y[3]) / m.det
            i_dr = (m.l_s * y[2] - m.l_m * y[0]) / m.det
            i_qr = (m.l_s * y[3] - m.l_m * y[1]) / m.det
            half_d = 0.5 * sqrt3 * i_ds
            i_abc[0] = i_qs
            i_abc[1] = -0.5 * i_qs - half_d
            i_abc[2] = -0.5 * i_qs + half_d
            w_mech = wr / m.p

            if k % speed_decim == 0:
                e = w_ref - w_mech
                du = _increment(e, e - last_e, fptr, gptr, aptr)
                last_e = e
                u_acc = u_acc + fptr[2] * du
                u_acc = _min(torque_limit, _max(-torque_limit, u_acc))
                ids_ref = lambda_ref / m.l_m
                iqs_ref = 2.0 * m.l_r * u_acc / (3.0 * m.p * m.l_m * lambda_ref)
                w_slip = m.r_r * m.l_m * iqs_ref / (m.l_r * lambda_ref)

            ref_abc[0] = iqs_ref * cos(theta_e) + ids_ref * sin(theta_e)
            ref_abc[1] = (iqs_ref * cos(theta_e - TWO_THIRDS_PI)
                          + ids_ref * sin(theta_e - TWO_THIRDS_PI))
            ref_abc[2] = (iqs_ref * cos(theta_e + TWO_THIRDS_PI)
                          + ids_ref * sin(theta_e + TWO_THIRDS_PI))

            if k % hcc_decim == 0:
                for ph in range(3):
                    err = ref_abc[ph] - i_abc[ph]
                    ce = err - hcc_err[ph]
                    u = _switching_law(err, ce, levels[ph], h, delta)
                    hcc_err[ph] = err
                    if u != levels[ph]:
                        switches[ph] += 1
                        if u * levels[ph] == -1:
                            illegal += 1
                        levels[ph] = u

            if k % trace_decim == 0:
                te = 1.5 * m.p * m.l_m * (i_qs * i_dr - i_ds * i_qr)
                c = cos(theta_e)
                s = sin(theta_e)
                rows[row, 0] = t
                rows[row, 1] = w_ref
                rows[row, 2] = w_mech
                rows[row, 3] = te
                rows[row, 4] = t_load
                rows[row, 5] = i_abc[0]
                rows[row, 6] = i_abc[1]
                rows[row, 7] = i_abc[2]
                rows[row, 8] = ref_abc[0]
                rows[row, 9] = ref_abc[1]
                rows[row, 10] = ref_abc[2]
                rows[row, 11] = (levels[0] - levels[1]) * v_half
                rows[row, 12] = y[3] * s + y[2] * c
                rows[row, 13] = y[3] * c - y[2] * s
                rows[row, 14] = levels[0]
                rows[row, 15] = levels[1]
                rows[row, 16] = levels[2]
                rows[row, 17] = theta_e
                row += 1

            ua = levels[0]
            ub = levels[1]
            uc = levels[2]
            v_q = (2 * ua - ub - uc) * v_sixth
            v_d = (uc - ub) * v_d_gain
            _rk4(&m, y, v_d, v_q, 0.0, t_load, dt)
            if not (isfinite(y[0]) and isfinite(y[1]) and isfinite(y[2])
                    and isfinite(y[3]) and isfinite(y[4])):
                fail = k
                break
            theta_e = _wrap(theta_e + (wr + w_slip) * dt)

    sw = np.array([switches[0], switches[1], switches[2]], dtype=np.int64)
    return rows_arr[:row], sw, int(illegal), int(fail)
