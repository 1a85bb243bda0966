# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=False
"""Compiled simulation kernels.

Mirror of `platestab._pure`, operation for operation: both backends must
produce bit-identical results.  Any change here must be transcribed there.
Plain C doubles and libm keep the arithmetic byte-compatible with the
CPython float path (no fast-math, no reordering).
"""

from libc.math cimport asin, atan2, cos, sin, sqrt, M_PI

import numpy as np

cdef double DEG2RAD = M_PI / 180.0


def run_closed_loop(
    n,
    dt,
    jx,
    jy,
    jz,
    base_height,
    plant_kind,
    home,
    rate_limit,
    lag_tau,
    servo_lo,
    servo_hi,
    crank,
    link,
    fg,
    fa,
    fdelay,
    kp,
    ki,
    kd,
    out_lo,
    out_hi,
    dist,
    noise,
):
    """Full three-leg closed-loop run; returns the (n, 19) trace array."""
    cdef Py_ssize_t c_n = int(n)
    cdef double c_dt = float(dt)
    cdef double c_jx[3]
    cdef double c_jy[3]
    cdef double c_jz[3]
    cdef double c_fg[3]
    cdef double c_fa[3]
    cdef Py_ssize_t c_fdelay[3]
    cdef double c_kp[3]
    cdef double c_ki[3]
    cdef double c_kd[3]
    cdef Py_ssize_t j
    for j in range(3):
        c_jx[j] = float(jx[j])
        c_jy[j] = float(jy[j])
        c_jz[j] = float(jz[j])
        c_fg[j] = float(fg[j])
        c_fa[j] = float(fa[j])
        c_fdelay[j] = int(fdelay[j])
        c_kp[j] = float(kp[j])
        c_ki[j] = float(ki[j])
        c_kd[j] = float(kd[j])
    cdef double c_bh = float(base_height)
    cdef int c_kind = int(plant_kind)
    cdef double c_home = float(home)
    cdef double c_rate = float(rate_limit)
    cdef double c_lag = float(lag_tau)
    cdef double c_slo = float(servo_lo)
    cdef double c_shi = float(servo_hi)
    cdef double c_crank = float(crank)
    cdef double c_link = float(link)
    cdef double c_olo = float(out_lo)
    cdef double c_ohi = float(out_hi)
    cdef double[:, ::1] c_dist = np.ascontiguousarray(dist, dtype=float)
    cdef double[:, ::1] c_noise = np.ascontiguousarray(noise, dtype=float)

    cdef double x10 = c_jx[1] - c_jx[0]
    cdef double y10 = c_jy[1] - c_jy[0]
    cdef double x20 = c_jx[2] - c_jx[0]
    cdef double y20 = c_jy[2] - c_jy[0]
    cdef double det = x10 * y20 - x20 * y10

    cdef double home_rad = c_home * DEG2RAD
    cdef double ch = cos(home_rad)
    cdef double home_z = c_crank * sin(home_rad) + sqrt(
        c_link * c_link - (c_crank * c_crank) * (ch * ch)
    )

    cdef double angle[3]
    cdef double yst[3]
    cdef double z[3]
    cdef double integral[3]
    cdef double prev_e[3]
    cdef double e_legs[3]
    cdef double u_legs[3]
    cdef double theta[3]
    for j in range(3):
        angle[j] = c_home
        yst[j] = 0.0
        z[j] = home_z
        integral[j] = 0.0
        prev_e[j] = 0.0

    hist_arr = np.zeros((3, c_n))
    cdef double[:, ::1] u_hist = hist_arr
    cdef double rel_pitch = 0.0
    cdef double rel_roll = 0.0

    out_arr = np.empty((c_n, 19))
    cdef double[:, ::1] out = out_arr

    cdef Py_ssize_t k, dly
    cdef double t, dyaw, dpitch, droll, plate_pitch, plate_roll
    cdef double sp, cp, sr, cr, s_p, c_p, s_r, c_r, w20, w21, w22, arg
    cdef double m_pitch, m_roll, sy, cy, sx, cx, zp0, zp1, zp2, zo
    cdef double e, cand, kij, raw, u, cmd, rate, ang, rad, c, yj, ueff
    cdef double d1, d2, a, b, cpr
    cdef double lohi, hilo

    for k in range(c_n):
        t = k * c_dt
        dyaw = c_dist[k, 0]
        dpitch = c_dist[k, 1]
        droll = c_dist[k, 2]

        if rel_pitch == 0.0 and rel_roll == 0.0:
            plate_pitch = dpitch
            plate_roll = droll
        else:
            sp = sin(dpitch)
            cp = cos(dpitch)
            sr = sin(droll)
            cr = cos(droll)
            s_p = sin(rel_pitch)
            c_p = cos(rel_pitch)
            s_r = sin(rel_roll)
            c_r = cos(rel_roll)
            w20 = -sp * c_p - cp * cr * s_p
            w21 = -sp * s_p * s_r + cp * sr * c_r + cp * cr * c_p * s_r
            w22 = -sp * s_p * c_r - cp * sr * s_r + cp * cr * c_p * c_r
            arg = -w20
            if arg > 1.0:
                arg = 1.0
            elif arg < -1.0:
                arg = -1.0
            plate_pitch = asin(arg)
            plate_roll = atan2(w21, w22)

        m_pitch = plate_pitch + c_noise[k, 0]
        m_roll = plate_roll + c_noise[k, 1]

        sy = sin(m_pitch)
        cy = cos(m_pitch)
        sx = sin(m_roll)
        cx = cos(m_roll)
        zp0 = (-sy) * c_jx[0] + (cy * sx) * c_jy[0] + (cy * cx) * c_jz[0] + c_bh
        zp1 = (-sy) * c_jx[1] + (cy * sx) * c_jy[1] + (cy * cx) * c_jz[1] + c_bh
        zp2 = (-sy) * c_jx[2] + (cy * sx) * c_jy[2] + (cy * cx) * c_jz[2] + c_bh

        lohi = min(zp0, zp1)
        hilo = max(zp0, zp1)
        zo = max(lohi, min(hilo, zp2))
        e_legs[0] = zo - zp0
        e_legs[1] = zo - zp1
        e_legs[2] = zo - zp2

        for j in range(3):
            e = e_legs[j]
            cand = integral[j] + e * c_dt
            kij = c_ki[j]
            if kij > 0.0:
                if kij * cand > c_ohi:
                    cand = c_ohi / kij
                elif kij * cand < c_olo:
                    cand = c_olo / kij
            raw = c_kp[j] * e + kij * cand + c_kd[j] * (e - prev_e[j]) / c_dt
            if raw > c_ohi:
                u = c_ohi
            elif raw < c_olo:
                u = c_olo
            else:
                u = raw
            if not ((raw > c_ohi and e > 0.0) or (raw < c_olo and e < 0.0)):
                integral[j] = cand
            prev_e[j] = e
            u_legs[j] = u

        if c_kind == 0:
            for j in range(3):
                cmd = c_home + u_legs[j]
                if cmd < c_slo:
                    cmd = c_slo
                elif cmd > c_shi:
                    cmd = c_shi
                rate = (cmd - angle[j]) / c_lag
                if rate > c_rate:
                    rate = c_rate
                elif rate < -c_rate:
                    rate = -c_rate
                ang = angle[j] + rate * c_dt
                if ang < c_slo:
                    ang = c_slo
                elif ang > c_shi:
                    ang = c_shi
                angle[j] = ang
                rad = ang * DEG2RAD
                c = cos(rad)
                z[j] = c_crank * sin(rad) + sqrt(
                    c_link * c_link - (c_crank * c_crank) * (c * c)
                )
                theta[j] = ang
        else:
            for j in range(3):
                u_hist[j, k] = u_legs[j]
                dly = c_fdelay[j]
                if k >= dly:
                    ueff = u_hist[j, k - dly]
                else:
                    ueff = 0.0
                yj = c_fa[j] * yst[j] + c_fg[j] * (1.0 - c_fa[j]) * ueff
                yst[j] = yj
                z[j] = home_z + yj
                theta[j] = c_home + u_legs[j]

        d1 = z[1] - z[0]
        d2 = z[2] - z[0]
        a = (d1 * y20 - d2 * y10) / det
        b = (x10 * d2 - x20 * d1) / det
        arg = -a
        if arg > 1.0:
            arg = 1.0
        elif arg < -1.0:
            arg = -1.0
        rel_pitch = asin(arg)
        cpr = cos(rel_pitch)
        if cpr != 0.0:
            arg = b / cpr
            if arg > 1.0:
                arg = 1.0
            elif arg < -1.0:
                arg = -1.0
            rel_roll = asin(arg)
        else:
            rel_roll = 0.0

        out[k, 0] = t
        out[k, 1] = dyaw
        out[k, 2] = dpitch
        out[k, 3] = droll
        out[k, 4] = plate_pitch
        out[k, 5] = plate_roll
        out[k, 6] = z[0]
        out[k, 7] = z[1]
        out[k, 8] = z[2]
        out[k, 9] = zo
        out[k, 10] = e_legs[0]
        out[k, 11] = e_legs[1]
        out[k, 12] = e_legs[2]
        out[k, 13] = u_legs[0]
        out[k, 14] = u_legs[1]
        out[k, 15] = u_legs[2]
        out[k, 16] = theta[0]
        out[k, 17] = theta[1]
        out[k, 18] = theta[2]
    return out_arr


def fopdt_closed_p(gain, alpha, delay, kp, setpoint, n):
    """Error series of a P-only loop around one FOPDT process."""
    cdef double c_gain = float(gain)
    cdef double c_alpha = float(alpha)
    cdef Py_ssize_t c_delay = int(delay)
    cdef double c_kp = float(kp)
    cdef double c_sp = float(setpoint)
    cdef Py_ssize_t c_n = int(n)
    cdef double y = 0.0
    hist_arr = np.zeros(c_n)
    cdef double[::1] u_hist = hist_arr
    err_arr = np.empty(c_n)
    cdef double[::1] err = err_arr
    cdef Py_ssize_t k
    cdef double e, u, ueff
    for k in range(c_n):
        e = c_sp - y
        err[k] = e
        u = c_kp * e
        u_hist[k] = u
        if k >= c_delay:
            ueff = u_hist[k - c_delay]
        else:
            ueff = 0.0
        y = c_alpha * y + c_gain * (1.0 - c_alpha) * ueff
    return err_arr


def fopdt_closed_pid(gain, alpha, delay, kp, ki, kd, dt, out_lo, out_hi, setpoint, n):
    """Output series of a saturated PID loop around one FOPDT process."""
    cdef double c_gain = float(gain)
    cdef double c_alpha = float(alpha)
    cdef Py_ssize_t c_delay = int(delay)
    cdef double c_kp = float(kp)
    cdef double c_ki = float(ki)
    cdef double c_kd = float(kd)
    cdef double c_dt = float(dt)
    cdef double c_olo = float(out_lo)
    cdef double c_ohi = float(out_hi)
    cdef double c_sp = float(setpoint)
    cdef Py_ssize_t c_n = int(n)
    cdef double y = 0.0
    cdef double integral = 0.0
    cdef double prev_e = 0.0
    hist_arr = np.zeros(c_n)
    cdef double[::1] u_hist = hist_arr
    out_arr = np.empty(c_n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k
    cdef double e, cand, raw, u, ueff
    for k in range(c_n):
        e = c_sp - y
        cand = integral + e * c_dt
        if c_ki > 0.0:
            if c_ki * cand > c_ohi:
                cand = c_ohi / c_ki
            elif c_ki * cand < c_olo:
                cand = c_olo / c_ki
        raw = c_kp * e + c_ki * cand + c_kd * (e - prev_e) / c_dt
        if raw > c_ohi:
            u = c_ohi
        elif raw < c_olo:
            u = c_olo
        else:
            u = raw
        if not ((raw > c_ohi and e > 0.0) or (raw < c_olo and e < 0.0)):
            integral = cand
        prev_e = e
        u_hist[k] = u
        if k >= c_delay:
            ueff = u_hist[k - c_delay]
        else:
            ueff = 0.0
        y = c_alpha * y + c_gain * (1.0 - c_alpha) * ueff
        out[k] = y
    return out_arr


def fopdt_open_step(gain, alpha, delay, magnitude, n):
    """Open-loop response of one FOPDT process to a step input at k = 0."""
    cdef double c_gain = float(gain)
    cdef double c_alpha = float(alpha)
    cdef Py_ssize_t c_delay = int(delay)
    cdef double c_mag = float(magnitude)
    cdef Py_ssize_t c_n = int(n)
    cdef double y = 0.0
    out_arr = np.empty(c_n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k
    cdef double ueff
    for k in range(c_n):
        if k >= c_delay:
            ueff = c_mag
        else:
            ueff = 0.0
        y = c_alpha * y + c_gain * (1.0 - c_alpha) * ueff
        out[k] = y
    return out_arr
