"""Simulated physical system: servos, leg geometry, processes, disturbances.

Closes the control loop numerically.  Each tick the rocket frame moves
per the disturbance profile, the plate orientation is measured (optionally
with noise), joint heights and errors are estimated, the three PID
controllers command the legs, the legs move (either a rate-limited lagged
servo driving a crank-slider, or a per-leg FOPDT process), and the new
plate attitude is reconstructed from the three heights.

The hot loop lives in a kernel module (Cython when built, pure Python
otherwise); both produce bit-identical traces.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .kinematics import EulerAngles, PlatformGeometry, default_geometry
from .pid import PidGains
from .tuning import FopdtModel

__all__ = [
    "ServoModel",
    "LegMechanism",
    "DisturbanceProfile",
    "SimulationTrace",
    "FopdtSim",
    "FopdtLoop",
    "MechanicalLegLoop",
    "TRACE_COLUMNS",
    "servo_update",
    "leg_z",
    "plate_from_leg_heights",
    "fopdt_step",
    "delay_steps",
    "simulate_closed_loop",
]


@dataclass
class ServoModel:
    """Hobby-servo motion model: first-order lag plus a slew-rate limit.

    rate_limit defaults to 600 deg/s (0.1 s per 60 degrees); lag_tau is
    the commanded-to-actual first-order time constant.
    """

    angle: float = 45.0
    rate_limit: float = 600.0
    lag_tau: float = 0.02
    range: tuple[float, float] = (0.0, 180.0)

    def __post_init__(self):
        lo, hi = self.range
        if not (0.0 <= lo < hi <= 180.0):
            raise ValueError("servo range must lie within [0, 180] with min < max")
        if not self.rate_limit > 0:
            raise ValueError("rate_limit must be positive")
        if not self.lag_tau > 0:
            raise ValueError("lag_tau must be positive")
        if not (lo <= self.angle <= hi):
            raise ValueError("initial angle must lie within range")

    def update(self, command: float, dt: float) -> float:
        """Advance one step toward `command`; returns the new angle."""
        if not dt > 0:
            raise ValueError("dt must be positive")
        lo, hi = self.range
        cmd = float(command)
        if cmd < lo:
            cmd = lo
        elif cmd > hi:
            cmd = hi
        rate = (cmd - self.angle) / self.lag_tau
        if rate > self.rate_limit:
            rate = self.rate_limit
        elif rate < -self.rate_limit:
            rate = -self.rate_limit
        ang = self.angle + rate * dt
        if ang < lo:
            ang = lo
        elif ang > hi:
            ang = hi
        self.angle = ang
        return ang


def servo_update(servo: ServoModel, command: float, dt: float) -> float:
    """Functional form of ServoModel.update."""
    return servo.update(command, dt)


@dataclass(frozen=True)
class LegMechanism:
    """Crank-slider leg: servo crank of length `crank`, coupler of length `link` (mm)."""

    crank: float = 15.0
    link: float = 79.0

    def __post_init__(self):
        if not self.crank > 0:
            raise ValueError("crank must be positive")
        if not self.link > self.crank:
            raise ValueError("link must exceed crank")


def leg_z(theta: float, mech: LegMechanism) -> float:
    """Ball-joint height above the servo axis for crank angle theta (degrees).

    z = r*sin(theta) + sqrt(L^2 - r^2*cos^2(theta)); strictly increasing
    on (0, 90) degrees.
    """
    th = float(theta)
    if not (0.0 <= th <= 180.0):
        raise ValueError("theta must lie in [0, 180] degrees")
    rad = th * (math.pi / 180.0)
    c = math.cos(rad)
    r = mech.crank
    return r * math.sin(rad) + math.sqrt(mech.link * mech.link - (r * r) * (c * c))


def plate_from_leg_heights(z, joint_xy) -> EulerAngles:
    """Pitch and roll of the plane through three joints at heights `z`.

    joint_xy gives the plate-frame (x, y) of each joint.  Yaw is
    unobservable from heights alone and returns as 0.  Inverse of the
    forward Zp relation for yaw-free poses.
    """
    (x0, y0), (x1, y1), (x2, y2) = ((float(p[0]), float(p[1])) for p in joint_xy)
    z0, z1, z2 = (float(v) for v in z)
    x10 = x1 - x0
    y10 = y1 - y0
    x20 = x2 - x0
    y20 = y2 - y0
    det = x10 * y20 - x20 * y10
    if abs(det) < 1e-9:
        raise ValueError("joint positions are collinear; plane is not unique")
    d1 = z1 - z0
    d2 = z2 - z0
    a = (d1 * y20 - d2 * y10) / det
    b = (x10 * d2 - x20 * d1) / det
    arg = -a
    if arg > 1.0:
        arg = 1.0
    elif arg < -1.0:
        arg = -1.0
    pitch = math.asin(arg)
    cp = math.cos(pitch)
    if cp != 0.0:
        arg = b / cp
        if arg > 1.0:
            arg = 1.0
        elif arg < -1.0:
            arg = -1.0
        roll = math.asin(arg)
    else:
        roll = 0.0
    return EulerAngles(0.0, pitch, roll)


def delay_steps(dead_time: float, dt: float) -> int:
    """Dead time as a whole number of samples, ceil(tau_d/dt) with a snap
    tolerance so exact multiples don't round up."""
    if dead_time <= 0.0:
        return 0
    return int(math.ceil(dead_time / dt - 1e-9))


class FopdtSim:
    """Stateful first-order-plus-dead-time process stepped at a fixed rate.

    One update per sample:  y' = a*y + K*(1-a)*u_delayed  with
    a = exp(-dt/tau_m); dead time is an integer delay line.
    """

    def __init__(self, model: FopdtModel, dt: float):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.model = model
        self.dt = float(dt)
        self.alpha = math.exp(-self.dt / model.time_constant)
        self.delay = delay_steps(model.dead_time, self.dt)
        self.reset()

    def reset(self) -> None:
        self.y = 0.0
        self._buf = [0.0] * self.delay
        self._pos = 0

    def step(self, u: float) -> float:
        """Push one input sample, advance the state, return the output."""
        u = float(u)
        if self.delay == 0:
            ueff = u
        else:
            ueff = self._buf[self._pos]
            self._buf[self._pos] = u
            self._pos = (self._pos + 1) % self.delay
        m = self.model
        self.y = self.alpha * self.y + m.gain * (1.0 - self.alpha) * ueff
        return self.y


def fopdt_step(sim: FopdtSim, u: float) -> float:
    """Functional form of FopdtSim.step."""
    return sim.step(u)


@dataclass(frozen=True)
class DisturbanceProfile:
    """Rocket-frame orientation as a function of time.

    kind "step": amplitudes applied from start_time on.
    kind "sine": sinusoid at freq_low, or a linear sweep freq_low ->
        freq_high over sweep_time (then holding freq_high), same phase on
        every driven axis.
    kind "recorded": replayed from a flight-log CSV (t,yaw,pitch,roll in
        degrees), linearly interpolated and held beyond the ends.
    """

    kind: str = "step"
    yaw_amplitude: float = 0.0
    pitch_amplitude: float = 0.0
    roll_amplitude: float = 0.0
    start_time: float = 1.0
    freq_low: float = 0.5
    freq_high: float = 0.5
    sweep_time: float = 10.0
    seed: int | None = None
    samples_path: str | None = None
    _table: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("step", "sine", "recorded"):
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        for name in ("yaw_amplitude", "pitch_amplitude", "roll_amplitude"):
            v = getattr(self, name)
            if not (math.isfinite(v) and abs(v) < math.pi / 2):
                raise ValueError(f"{name} must be finite and below pi/2 rad")
        if self.kind == "sine":
            if not (self.freq_low > 0 and self.freq_high > 0):
                raise ValueError("sine frequencies must be positive")
            if self.freq_high != self.freq_low and not self.sweep_time > 0:
                raise ValueError("sweep_time must be positive for a sweep")
        if self.kind == "recorded":
            if not self.samples_path:
                raise ValueError("recorded profile needs samples_path")
            object.__setattr__(self, "_table", _load_recorded(self.samples_path))

    def _phase(self, t: np.ndarray) -> np.ndarray:
        f0, f1, ts = self.freq_low, self.freq_high, self.sweep_time
        if f1 == f0:
            return 2.0 * math.pi * f0 * t
        rate = (f1 - f0) / ts
        ph = 2.0 * math.pi * (f0 * t + 0.5 * rate * t * t)
        ph_end = 2.0 * math.pi * (f0 * ts + 0.5 * rate * ts * ts)
        return np.where(t <= ts, ph, ph_end + 2.0 * math.pi * f1 * (t - ts))

    def samples(self, n: int, dt: float) -> np.ndarray:
        """(n, 3) array of yaw/pitch/roll at t = k*dt, radians."""
        t = np.arange(n) * dt
        amps = (self.yaw_amplitude, self.pitch_amplitude, self.roll_amplitude)
        out = np.zeros((n, 3))
        if self.kind == "step":
            on = t >= self.start_time
            for i, amp in enumerate(amps):
                out[:, i] = np.where(on, amp, 0.0)
        elif self.kind == "sine":
            wave = np.sin(self._phase(t))
            for i, amp in enumerate(amps):
                out[:, i] = amp * wave
        else:
            tt, yawd, pitchd, rolld = self._table
            out[:, 0] = np.interp(t, tt, yawd)
            out[:, 1] = np.interp(t, tt, pitchd)
            out[:, 2] = np.interp(t, tt, rolld)
        return out

    def sample(self, t: float) -> EulerAngles:
        """Single-instant form of samples()."""
        row = self.samples_at(np.array([float(t)]))
        return EulerAngles(row[0, 0], row[0, 1], row[0, 2])

    def samples_at(self, t: np.ndarray) -> np.ndarray:
        """(len(t), 3) yaw/pitch/roll at arbitrary times."""
        t = np.asarray(t, dtype=float)
        amps = (self.yaw_amplitude, self.pitch_amplitude, self.roll_amplitude)
        out = np.zeros((t.size, 3))
        if self.kind == "step":
            on = t >= self.start_time
            for i, amp in enumerate(amps):
                out[:, i] = np.where(on, amp, 0.0)
        elif self.kind == "sine":
            wave = np.sin(self._phase(t))
            for i, amp in enumerate(amps):
                out[:, i] = amp * wave
        else:
            tt, yawd, pitchd, rolld = self._table
            out[:, 0] = np.interp(t, tt, yawd)
            out[:, 1] = np.interp(t, tt, pitchd)
            out[:, 2] = np.interp(t, tt, rolld)
        return out


def _load_recorded(path: str) -> tuple:
    deg2rad = math.pi / 180.0
    times, yaw, pitch, roll = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:4]] != ["t", "yaw", "pitch", "roll"]:
            raise ValueError(f"recorded profile {path}: header must start t,yaw,pitch,roll")
        prev_t = None
        for row in reader:
            if len(row) < 4:
                continue
            try:
                vals = [float(v) for v in row[:4]]
            except ValueError:
                continue
            if not all(math.isfinite(v) for v in vals):
                continue
            if prev_t is not None and vals[0] <= prev_t:
                continue
            prev_t = vals[0]
            times.append(vals[0])
            yaw.append(vals[1] * deg2rad)
            pitch.append(vals[2] * deg2rad)
            roll.append(vals[3] * deg2rad)
    if len(times) < 2:
        raise ValueError(f"recorded profile {path}: need at least 2 usable samples")
    return (np.array(times), np.array(yaw), np.array(pitch), np.array(roll))


TRACE_COLUMNS = (
    "t",
    "rocket_yaw",
    "rocket_pitch",
    "rocket_roll",
    "plate_pitch",
    "plate_roll",
    "z1",
    "z2",
    "z3",
    "zo",
    "e1",
    "e2",
    "e3",
    "u1",
    "u2",
    "u3",
    "theta1",
    "theta2",
    "theta3",
)


@dataclass(frozen=True)
class SimulationTrace:
    """Uniformly sampled closed-loop run, one row per tick.

    Columns: time; rocket yaw/pitch/roll and true plate pitch/roll
    (radians); leg heights z1..z3 and set-point zo (mm); errors e1..e3
    (mm); controller outputs u1..u3 (degrees); servo angles theta1..theta3
    (degrees; for FOPDT runs these are the commanded angles).
    """

    data: np.ndarray
    dt: float

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 2 or d.shape[1] != len(TRACE_COLUMNS):
            raise ValueError(f"trace must have {len(TRACE_COLUMNS)} columns")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def columns(self) -> tuple[str, ...]:
        return TRACE_COLUMNS

    def __len__(self):
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            idx = TRACE_COLUMNS.index(name)
        except ValueError:
            raise KeyError(f"unknown trace column {name!r}") from None
        return self.data[:, idx]

    def to_csv(self, path) -> None:
        """Write the trace with a header row; floats carry 9 significant digits."""
        with open(path, "w", newline="") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for row in self.data:
                fh.write(",".join(f"{v:.9g}" for v in row) + "\n")


def simulate_closed_loop(
    gains,
    profile: DisturbanceProfile,
    duration: float = 10.0,
    dt: float = 0.005,
    *,
    geometry: PlatformGeometry | None = None,
    plant_kind: str = "mechanistic",
    servo: ServoModel | None = None,
    fopdt_models=None,
    output_limits=(-45.0, 45.0),
    noise_sigma: float = 0.0,
    seed: int | None = None,
) -> SimulationTrace:
    """Run the full closed loop and return its trace.

    `gains` is one PidGains per leg.  The plate starts level with the
    rocket frame; the disturbance profile drives the rocket frame and the
    loop drives the plate back toward level.  Bit-deterministic for a
    given seed and configuration.
    """
    if geometry is None:
        geometry = default_geometry()
    if not duration > 0:
        raise ValueError("duration must be positive")
    if not dt > 0:
        raise ValueError("dt must be positive")
    gains = tuple(gains)
    if len(gains) != 3 or not all(isinstance(g, PidGains) for g in gains):
        raise ValueError("gains must be three PidGains, one per leg")
    if plant_kind not in ("mechanistic", "fopdt"):
        raise ValueError(f"unknown plant_kind {plant_kind!r}")
    lo, hi = float(output_limits[0]), float(output_limits[1])
    if not lo < hi:
        raise ValueError("output_limits must satisfy min < max")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    n = int(round(duration / dt))
    if n < 1:
        raise ValueError("duration must cover at least one sample")

    if servo is None:
        servo = ServoModel(angle=geometry.servo_home)
    if plant_kind == "fopdt":
        if fopdt_models is None or len(tuple(fopdt_models)) != 3:
            raise ValueError("fopdt plant needs three FopdtModel entries")
        models = tuple(fopdt_models)
        fg = [m.gain for m in models]
        fa = [math.exp(-dt / m.time_constant) for m in models]
        fdelay = [delay_steps(m.dead_time, dt) for m in models]
    else:
        fg = [0.0, 0.0, 0.0]
        fa = [0.0, 0.0, 0.0]
        fdelay = [0, 0, 0]

    dist = profile.samples(n, dt)
    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        noise = noise_sigma * rng.standard_normal((n, 2))
    else:
        noise = np.zeros((n, 2))

    jx = [j.x for j in geometry.joint_top]
    jy = [j.y for j in geometry.joint_top]
    jz = [j.z for j in geometry.joint_top]

    data = _backend.run_closed_loop(
        n,
        dt,
        jx,
        jy,
        jz,
        geometry.base_height,
        0 if plant_kind == "mechanistic" else 1,
        geometry.servo_home,
        servo.rate_limit,
        servo.lag_tau,
        servo.range[0],
        servo.range[1],
        geometry.crank_length,
        geometry.link_length,
        fg,
        fa,
        fdelay,
        [g.kp for g in gains],
        [g.ki for g in gains],
        [g.kd for g in gains],
        lo,
        hi,
        dist,
        noise,
    )
    return SimulationTrace(data=data, dt=dt)


class FopdtLoop:
    """Probe harness around a single FOPDT process, for the tuning procedures.

    Provides the three experiments the tuners need: an open-loop step, a
    proportional-only closed loop (unsaturated, so growth is visible), and
    a saturated PID closed loop.  Step targets default to setpoint 1.
    """

    def __init__(self, model: FopdtModel, dt: float = 0.005, setpoint: float = 1.0,
                 output_limits=(-1e6, 1e6)):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.model = model
        self.dt = float(dt)
        self.setpoint = float(setpoint)
        self.output_limits = (float(output_limits[0]), float(output_limits[1]))
        self._alpha = math.exp(-self.dt / model.time_constant)
        self._delay = delay_steps(model.dead_time, self.dt)

    def _n(self, duration: float) -> int:
        n = int(round(duration / self.dt))
        if n < 2:
            raise ValueError("duration too short for the probe")
        return n

    def open_loop_step(self, magnitude: float = 1.0, duration: float | None = None):
        """(t, y) response to an input step of `magnitude` from rest."""
        m = self.model
        if duration is None:
            duration = 8.0 * m.time_constant + 2.0 * m.dead_time
        n = self._n(duration)
        y = _backend.fopdt_open_step(m.gain, self._alpha, self._delay, magnitude, n)
        return np.arange(1, n + 1) * self.dt, y

    def probe_p(self, kp: float, duration: float) -> np.ndarray:
        """Error series of the unsaturated P-only loop at gain kp."""
        n = self._n(duration)
        return _backend.fopdt_closed_p(
            self.model.gain, self._alpha, self._delay, kp, self.setpoint, n
        )

    def closed_loop_step(self, gains: PidGains, duration: float):
        """(t, y) response of the saturated PID loop to a set-point step."""
        n = self._n(duration)
        lo, hi = self.output_limits
        y = _backend.fopdt_closed_pid(
            self.model.gain,
            self._alpha,
            self._delay,
            gains.kp,
            gains.ki,
            gains.kd,
            self.dt,
            lo,
            hi,
            self.setpoint,
            n,
        )
        return np.arange(1, n + 1) * self.dt, y


class MechanicalLegLoop:
    """Probe harness around one servo-driven crank-slider leg.

    Input is a servo command offset (degrees) around home; output is the
    joint height above its home value (mm).  Same protocol as FopdtLoop.
    """

    def __init__(
        self,
        servo: ServoModel | None = None,
        mech: LegMechanism | None = None,
        home: float = 45.0,
        dt: float = 0.005,
        setpoint: float = 1.0,
    ):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.servo_template = servo if servo is not None else ServoModel(angle=home)
        self.mech = mech if mech is not None else LegMechanism()
        self.home = float(home)
        self.dt = float(dt)
        self.setpoint = float(setpoint)
        self.home_z = leg_z(self.home, self.mech)

    def _fresh_servo(self) -> ServoModel:
        s = self.servo_template
        return ServoModel(angle=self.home, rate_limit=s.rate_limit, lag_tau=s.lag_tau,
                          range=s.range)

    def open_loop_step(self, magnitude: float = 5.0, duration: float | None = None):
        if duration is None:
            duration = 1.0
        n = int(round(duration / self.dt))
        if n < 2:
            raise ValueError("duration too short for the probe")
        servo = self._fresh_servo()
        t = np.arange(1, n + 1) * self.dt
        y = np.empty(n)
        cmd = self.home + magnitude
        for k in range(n):
            ang = servo.update(cmd, self.dt)
            y[k] = leg_z(ang, self.mech) - self.home_z
        return t, y

    def probe_p(self, kp: float, duration: float) -> np.ndarray:
        n = int(round(duration / self.dt))
        if n < 2:
            raise ValueError("duration too short for the probe")
        servo = self._fresh_servo()
        err = np.empty(n)
        y = 0.0
        for k in range(n):
            e = self.setpoint - y
            err[k] = e
            ang = servo.update(self.home + kp * e, self.dt)
            y = leg_z(ang, self.mech) - self.home_z
        return err

    def closed_loop_step(self, gains: PidGains, duration: float):
        from .pid import PidController

        n = int(round(duration / self.dt))
        if n < 2:
            raise ValueError("duration too short for the probe")
        servo = self._fresh_servo()
        ctrl = PidController(gains, dt=self.dt)
        t = np.arange(1, n + 1) * self.dt
        y = np.empty(n)
        height = 0.0
        for k in range(n):
            u = ctrl.step(self.setpoint - height)
            ang = servo.update(self.home + u, self.dt)
            height = leg_z(ang, self.mech) - self.home_z
            y[k] = height
        return t, y
