"""State estimation for the plate controller.

Turns an orientation sample into per-leg joint heights, picks the median
height as the shared set-point, and forms the per-leg error signals.  The
leg sitting at the median is the stationary one: its error is exactly
zero, so a zero-state controller leaves it alone and only two legs move.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .kinematics import EulerAngles, PlatformGeometry, RobotState, ball_joint_positions

__all__ = [
    "RobotState",
    "SetPointDecision",
    "median_setpoint",
    "error_signals",
    "estimate_state",
    "setpoint_decision",
]


@dataclass(frozen=True)
class SetPointDecision:
    """Median set-point, the leg that holds it, and the three error signals."""

    z_target: float
    stationary_leg: int
    errors: tuple[float, float, float]

    def __post_init__(self):
        if self.stationary_leg not in (0, 1, 2):
            raise ValueError("stationary_leg must be 0, 1 or 2")
        if self.errors[self.stationary_leg] != 0.0:
            raise ValueError("stationary leg must carry zero error")


def median_setpoint(z) -> tuple[float, int]:
    """Median of three heights and the index of a leg attaining it.

    Ties break to the lowest index, keeping the choice deterministic.
    """
    z0, z1, z2 = (float(v) for v in z)
    if not (math.isfinite(z0) and math.isfinite(z1) and math.isfinite(z2)):
        raise ValueError("leg heights must be finite")
    m = max(min(z0, z1), min(max(z0, z1), z2))
    if z0 == m:
        idx = 0
    elif z1 == m:
        idx = 1
    else:
        idx = 2
    return m, idx


def error_signals(z_target: float, z) -> tuple[float, float, float]:
    """Signed errors z_target - z_j.

    The sign tells each controller which way to drive; the magnitude is
    the usual absolute error.  The leg whose height equals the target
    gets exactly 0.
    """
    zt = float(z_target)
    z0, z1, z2 = (float(v) for v in z)
    if not all(math.isfinite(v) for v in (zt, z0, z1, z2)):
        raise ValueError("heights must be finite")
    return (zt - z0, zt - z1, zt - z2)


def estimate_state(
    angles: EulerAngles, geometry: PlatformGeometry, timestamp: float = 0.0
) -> RobotState:
    """Forward kinematics of the plate pose, stamped with time."""
    return ball_joint_positions(angles, geometry, timestamp=timestamp)


def setpoint_decision(z) -> SetPointDecision:
    """Bundle the median set-point and error signals for one tick."""
    z_target, idx = median_setpoint(z)
    return SetPointDecision(
        z_target=z_target, stationary_leg=idx, errors=error_signals(z_target, z)
    )
