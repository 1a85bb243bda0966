"""Pure-Python simulation kernels.

`platestab._core` (Cython) implements the same four functions with the
same arithmetic, operation for operation, so both backends produce
bit-identical traces.  Any change here must be transcribed there.

Conventions shared by both backends:
  * angles in the trace are radians; servo angles degrees; heights mm
  * the closed-loop trace has 19 columns (see plant.TRACE_COLUMNS)
  * FOPDT processes advance as  y' = a*y + K*(1-a)*u_delayed  with
    a = exp(-dt/tau_m) and an integer input delay line
  * the PID update mirrors pid.PidController.step exactly
"""
from __future__ import annotations

from math import asin, atan2, cos, pi, sin, sqrt

import numpy as np

DEG2RAD = pi / 180.0


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
    """Full three-leg closed-loop run; returns the (n, 19) trace array.

    plant_kind 0 = servo + crank-slider legs, 1 = per-leg FOPDT processes.
    `dist` is (n, 3) rocket-frame yaw/pitch/roll; `noise` is (n, 2)
    additive measurement noise on plate pitch/roll (zeros when disabled).
    """
    n = int(n)
    dt = float(dt)
    jx = [float(v) for v in jx]
    jy = [float(v) for v in jy]
    jz = [float(v) for v in jz]
    base_height = float(base_height)
    plant_kind = int(plant_kind)
    home = float(home)
    rate_limit = float(rate_limit)
    lag_tau = float(lag_tau)
    servo_lo = float(servo_lo)
    servo_hi = float(servo_hi)
    crank = float(crank)
    link = float(link)
    fg = [float(v) for v in fg]
    fa = [float(v) for v in fa]
    fdelay = [int(v) for v in fdelay]
    kp = [float(v) for v in kp]
    ki = [float(v) for v in ki]
    kd = [float(v) for v in kd]
    out_lo = float(out_lo)
    out_hi = float(out_hi)
    dist = np.ascontiguousarray(dist, dtype=float)
    noise = np.ascontiguousarray(noise, dtype=float)
    d_list = dist.tolist()
    n_list = noise.tolist()

    x10 = jx[1] - jx[0]
    y10 = jy[1] - jy[0]
    x20 = jx[2] - jx[0]
    y20 = jy[2] - jy[0]
    det = x10 * y20 - x20 * y10

    home_rad = home * DEG2RAD
    ch = cos(home_rad)
    home_z = crank * sin(home_rad) + sqrt(link * link - (crank * crank) * (ch * ch))

    angle = [home, home, home]
    yst = [0.0, 0.0, 0.0]
    z = [home_z, home_z, home_z]
    integral = [0.0, 0.0, 0.0]
    prev_e = [0.0, 0.0, 0.0]
    u_hist = [[0.0] * n for _ in range(3)]
    rel_pitch = 0.0
    rel_roll = 0.0

    out = np.empty((n, 19))
    for k in range(n):
        t = k * dt
        dyaw = d_list[k][0]
        dpitch = d_list[k][1]
        droll = d_list[k][2]

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

        m_pitch = plate_pitch + n_list[k][0]
        m_roll = plate_roll + n_list[k][1]

        sy = sin(m_pitch)
        cy = cos(m_pitch)
        sx = sin(m_roll)
        cx = cos(m_roll)
        zp0 = (-sy) * jx[0] + (cy * sx) * jy[0] + (cy * cx) * jz[0] + base_height
        zp1 = (-sy) * jx[1] + (cy * sx) * jy[1] + (cy * cx) * jz[1] + base_height
        zp2 = (-sy) * jx[2] + (cy * sx) * jy[2] + (cy * cx) * jz[2] + base_height

        zo = max(min(zp0, zp1), min(max(zp0, zp1), zp2))
        e_legs = (zo - zp0, zo - zp1, zo - zp2)

        u_legs = [0.0, 0.0, 0.0]
        for j in range(3):
            e = e_legs[j]
            cand = integral[j] + e * dt
            kij = ki[j]
            if kij > 0.0:
                if kij * cand > out_hi:
                    cand = out_hi / kij
                elif kij * cand < out_lo:
                    cand = out_lo / kij
            raw = kp[j] * e + kij * cand + kd[j] * (e - prev_e[j]) / dt
            if raw > out_hi:
                u = out_hi
            elif raw < out_lo:
                u = out_lo
            else:
                u = raw
            if not ((raw > out_hi and e > 0.0) or (raw < out_lo and e < 0.0)):
                integral[j] = cand
            prev_e[j] = e
            u_legs[j] = u

        theta = [0.0, 0.0, 0.0]
        if plant_kind == 0:
            for j in range(3):
                cmd = home + u_legs[j]
                if cmd < servo_lo:
                    cmd = servo_lo
                elif cmd > servo_hi:
                    cmd = servo_hi
                rate = (cmd - angle[j]) / lag_tau
                if rate > rate_limit:
                    rate = rate_limit
                elif rate < -rate_limit:
                    rate = -rate_limit
                ang = angle[j] + rate * dt
                if ang < servo_lo:
                    ang = servo_lo
                elif ang > servo_hi:
                    ang = servo_hi
                angle[j] = ang
                rad = ang * DEG2RAD
                c = cos(rad)
                z[j] = crank * sin(rad) + sqrt(link * link - (crank * crank) * (c * c))
                theta[j] = ang
        else:
            for j in range(3):
                u_hist[j][k] = u_legs[j]
                dly = fdelay[j]
                ueff = u_hist[j][k - dly] if k >= dly else 0.0
                yj = fa[j] * yst[j] + fg[j] * (1.0 - fa[j]) * ueff
                yst[j] = yj
                z[j] = home_z + yj
                theta[j] = home + u_legs[j]

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
    return out


def fopdt_closed_p(gain, alpha, delay, kp, setpoint, n):
    """Error series of a P-only loop around one FOPDT process."""
    gain = float(gain)
    alpha = float(alpha)
    delay = int(delay)
    kp = float(kp)
    setpoint = float(setpoint)
    n = int(n)
    y = 0.0
    u_hist = [0.0] * n
    err = np.empty(n)
    for k in range(n):
        e = setpoint - y
        err[k] = e
        u = kp * e
        u_hist[k] = u
        ueff = u_hist[k - delay] if k >= delay else 0.0
        y = alpha * y + gain * (1.0 - alpha) * ueff
    return err


def fopdt_closed_pid(gain, alpha, delay, kp, ki, kd, dt, out_lo, out_hi, setpoint, n):
    """Output series of a saturated PID loop around one FOPDT process."""
    gain = float(gain)
    alpha = float(alpha)
    delay = int(delay)
    kp = float(kp)
    ki = float(ki)
    kd = float(kd)
    dt = float(dt)
    out_lo = float(out_lo)
    out_hi = float(out_hi)
    setpoint = float(setpoint)
    n = int(n)
    y = 0.0
    integral = 0.0
    prev_e = 0.0
    u_hist = [0.0] * n
    out = np.empty(n)
    for k in range(n):
        e = setpoint - y
        cand = integral + e * dt
        if ki > 0.0:
            if ki * cand > out_hi:
                cand = out_hi / ki
            elif ki * cand < out_lo:
                cand = out_lo / ki
        raw = kp * e + ki * cand + kd * (e - prev_e) / dt
        if raw > out_hi:
            u = out_hi
        elif raw < out_lo:
            u = out_lo
        else:
            u = raw
        if not ((raw > out_hi and e > 0.0) or (raw < out_lo and e < 0.0)):
            integral = cand
        prev_e = e
        u_hist[k] = u
        ueff = u_hist[k - delay] if k >= delay else 0.0
        y = alpha * y + gain * (1.0 - alpha) * ueff
        out[k] = y
    return out


def fopdt_open_step(gain, alpha, delay, magnitude, n):
    """Open-loop response of one FOPDT process to a step input at k = 0."""
    gain = float(gain)
    alpha = float(alpha)
    delay = int(delay)
    magnitude = float(magnitude)
    n = int(n)
    y = 0.0
    out = np.empty(n)
    for k in range(n):
        ueff = magnitude if k >= delay else 0.0
        y = alpha * y + gain * (1.0 - alpha) * ueff
        out[k] = y
    return out
