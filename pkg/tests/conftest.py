"""Shared helpers for the test suite.

The oracles used across files live here so every test compares against
the same independently stated closed forms rather than against the
implementation under test.
"""
import numpy as np


def analytic_fopdt_step(gain, dead_time, time_constant, t, step=1.0):
    """Closed-form step response: K*step*(1 - exp(-(t - td)/tm)), 0 before td."""
    t = np.asarray(t, dtype=float)
    shifted = np.clip(t - dead_time, 0.0, None)
    y = gain * step * (1.0 - np.exp(-shifted / time_constant))
    return np.where(t >= dead_time, y, 0.0)


def rotation_matrix_zyx(yaw, pitch, roll):
    """Independent yaw-pitch-roll rotation built from the three axis matrices.

    Composes Rz(yaw) @ Ry(pitch) @ Rx(roll) numerically instead of using
    the expanded termwise entries, so it can serve as an oracle for them.
    """
    cz, sz = np.cos(yaw), np.sin(yaw)
    cy, sy = np.cos(pitch), np.sin(pitch)
    cx, sx = np.cos(roll), np.sin(roll)
    rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    return rz @ ry @ rx
