"""Discrete PID controller for the per-leg height loops.

The control law is the textbook positional form with the integral scaled
by the sample time and the derivative by its inverse, so gains keep their
meaning when the loop rate changes:

    out = clamp(kp*e + ki*sum(e)*dt + kd*(e - e_prev)/dt)

Anti-windup is conditional integration: while the output is saturated and
the current error would push it further into the limit, the integrator is
frozen.  The integral is additionally clamped so that ki*integral alone
stays inside the output limits.  Default sample time is 0.005 s (200 Hz).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["PidGains", "PidController", "output_to_servo_angle"]


@dataclass(frozen=True)
class PidGains:
    """Proportional (unitless), integral (1/s) and derivative (s) gains."""

    kp: float
    ki: float = 0.0
    kd: float = 0.0

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"PidGains.{name} must be finite and >= 0")


class PidController:
    """Single-leg PID with saturation and conditional anti-windup.

    Mutable single-owner state; make one instance per leg.
    """

    def __init__(self, gains: PidGains, dt: float = 0.005, output_limits=(-90.0, 90.0)):
        lo, hi = float(output_limits[0]), float(output_limits[1])
        if not dt > 0:
            raise ValueError("dt must be positive")
        if not lo < hi:
            raise ValueError("output_limits must satisfy min < max")
        self.gains = gains
        self.dt = float(dt)
        self.output_limits = (lo, hi)
        self.integral = 0.0
        self.prev_error = 0.0

    def reset(self) -> None:
        """Zero the integrator and derivative memory; gains and limits stay."""
        self.integral = 0.0
        self.prev_error = 0.0

    def step(self, error: float) -> float:
        """Advance one sample and return the saturated output (degrees)."""
        e = float(error)
        if not math.isfinite(e):
            raise ValueError("error must be finite")
        g = self.gains
        lo, hi = self.output_limits
        dt = self.dt

        candidate = self.integral + e * dt
        if g.ki > 0.0:
            # keep the integral contribution alone within the limits
            if g.ki * candidate > hi:
                candidate = hi / g.ki
            elif g.ki * candidate < lo:
                candidate = lo / g.ki
        raw = g.kp * e + g.ki * candidate + g.kd * (e - self.prev_error) / dt

        if raw > hi:
            out = hi
        elif raw < lo:
            out = lo
        else:
            out = raw

        # conditional integration: freeze while saturated in the error's direction
        if not ((raw > hi and e > 0.0) or (raw < lo and e < 0.0)):
            self.integral = candidate
        self.prev_error = e
        return out


def output_to_servo_angle(output: float, home: float, angle_range=(0.0, 180.0)) -> float:
    """Absolute servo command: home + output, clamped to the travel range."""
    lo, hi = float(angle_range[0]), float(angle_range[1])
    if not (0.0 <= lo < hi <= 180.0):
        raise ValueError("angle_range must lie within [0, 180] with min < max")
    cmd = float(home) + float(output)
    if cmd < lo:
        return lo
    if cmd > hi:
        return hi
    return cmd
