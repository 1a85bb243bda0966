"""PID tuning procedures and step-response plant identification.

Three tuners are provided:

  * `zn_gains` — the classic closed-loop rule table applied to a measured
    ultimate gain and critical period (found with `find_ultimate_gain`);
  * `cohen_coon_gains` — step-response rules applied to an identified
    first-order-plus-dead-time (FOPDT) model (`fit_fopdt`);
  * `custom_tune` — open-loop characterization followed by iterative
    manual-style gain adjustment against overshoot/settling targets.

Plant handles passed to the search procedures follow a small protocol:
``dt``/``setpoint`` attributes plus ``probe_p(kp, duration)``,
``open_loop_step(magnitude, duration=None)`` and
``closed_loop_step(gains, duration)`` (see plant.FopdtLoop).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pid import PidGains

__all__ = [
    "FopdtModel",
    "UltimateGainResult",
    "TuningOutput",
    "TuningError",
    "zn_gains",
    "cohen_coon_gains",
    "fit_fopdt",
    "measure_oscillation_period",
    "find_ultimate_gain",
    "custom_tune",
]

# two-point identification levels: the exact fractions 1 - e^(-1/3) and
# 1 - e^(-1) ("28.3%" and "63.2%"), which make the tau rules below exact
# on a true first-order response
_LEVEL1 = 1.0 - math.exp(-1.0 / 3.0)
_LEVEL2 = 1.0 - math.exp(-1.0)


class TuningError(RuntimeError):
    """A tuning procedure could not produce a result for this plant."""


@dataclass(frozen=True)
class FopdtModel:
    """First-order-plus-dead-time process: gain K, dead time, time constant."""

    gain: float
    dead_time: float
    time_constant: float

    def __post_init__(self):
        for name in ("gain", "dead_time", "time_constant"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"FopdtModel.{name} must be finite")
        if not self.time_constant > 0:
            raise ValueError("time_constant must be positive")
        if self.dead_time < 0:
            raise ValueError("dead_time must be >= 0")

    @property
    def tunable(self) -> bool:
        """Step-response rules require dead time below twice the time constant."""
        return self.dead_time < 2.0 * self.time_constant


@dataclass(frozen=True)
class UltimateGainResult:
    """Proportional gain of sustained oscillation and the oscillation period."""

    ku: float
    tu: float

    def __post_init__(self):
        if not self.ku > 0:
            raise ValueError("ku must be positive")
        if not self.tu > 0:
            raise ValueError("tu must be positive")


@dataclass(frozen=True)
class TuningOutput:
    """Gains from one tuning rule: kp plus integral/derivative times.

    ti and td are present only where the rule defines them; ki and kd are
    derived as kp/ti and kp*td.
    """

    controller_type: str
    kp: float
    ti: float | None = None
    td: float | None = None

    def __post_init__(self):
        expect = {
            "P": (False, False),
            "PI": (True, False),
            "PD": (False, True),
            "PID": (True, True),
        }
        if self.controller_type not in expect:
            raise ValueError(f"unknown controller type {self.controller_type!r}")
        want_ti, want_td = expect[self.controller_type]
        if want_ti != (self.ti is not None) or want_td != (self.td is not None):
            raise ValueError(f"{self.controller_type} output has wrong ti/td fields")
        if not (math.isfinite(self.kp) and self.kp > 0):
            raise ValueError("kp must be finite and positive")
        if self.ti is not None and not self.ti > 0:
            raise ValueError("ti must be positive")
        if self.td is not None and not self.td > 0:
            raise ValueError("td must be positive")

    @property
    def ki(self) -> float | None:
        return None if self.ti is None else self.kp / self.ti

    @property
    def kd(self) -> float | None:
        return None if self.td is None else self.kp * self.td

    def pid_gains(self) -> PidGains:
        """As controller gains, absent terms zeroed."""
        return PidGains(
            kp=self.kp,
            ki=0.0 if self.ti is None else self.kp / self.ti,
            kd=0.0 if self.td is None else self.kp * self.td,
        )


def zn_gains(ku: float, tu: float, controller_type: str = "PID") -> TuningOutput:
    """Closed-loop rule table: gains from ultimate gain and critical period.

    P: kp = ku/2.  PI: kp = ku/2.2, ti = tu/1.2.
    PID: kp = ku/1.7, ti = tu/2, td = tu/8.  PD is not defined here.
    """
    if not (math.isfinite(ku) and ku > 0):
        raise ValueError("ku must be finite and positive")
    if not (math.isfinite(tu) and tu > 0):
        raise ValueError("tu must be finite and positive")
    if controller_type == "P":
        return TuningOutput("P", kp=ku / 2.0)
    if controller_type == "PI":
        return TuningOutput("PI", kp=ku / 2.2, ti=tu / 1.2)
    if controller_type == "PID":
        return TuningOutput("PID", kp=ku / 1.7, ti=tu / 2.0, td=tu / 8.0)
    raise TuningError(
        f"controller type {controller_type!r} is not defined by the closed-loop rule table"
    )


def cohen_coon_gains(model: FopdtModel, controller_type: str = "PID") -> TuningOutput:
    """Step-response rule table evaluated on an FOPDT model.

    With r = tau_d/tau_m and A = tau_m/(K*tau_d):
      P:   kp = A*(1 + r/3)
      PI:  kp = A*(0.9 + r/12),  ti = tau_d*(30 + 3r)/(9 + 20r)
      PD:  kp = A*(1.25 + r/6),  td = tau_d*(6 - 2r)/(22 + 3r)
      PID: kp = A*(1 + r/3),     ti = tau_d*(32 + 6r)/(13 + 8r),
                                 td = 4*tau_d/(11 + 2r)

    Note the PID proportional factor in this rule set matches the P row.
    Requires 0 < tau_d < 2*tau_m: zero dead time makes every row divide
    by zero, and beyond twice the time constant the rules do not apply.
    """
    if not model.gain > 0:
        raise TuningError("process gain must be positive to tune against")
    if model.dead_time <= 0.0:
        raise TuningError(
            "dead time is zero: the step-response rules are degenerate (division by tau_d)"
        )
    if not model.tunable:
        raise TuningError(
            "dead time must be less than twice the time constant (tau_d < 2*tau_m)"
        )
    td_, tm = model.dead_time, model.time_constant
    r = td_ / tm
    a = tm / (model.gain * td_)
    if controller_type == "P":
        return TuningOutput("P", kp=a * (1.0 + r / 3.0))
    if controller_type == "PI":
        return TuningOutput(
            "PI",
            kp=a * (0.9 + r / 12.0),
            ti=td_ * (30.0 + 3.0 * r) / (9.0 + 20.0 * r),
        )
    if controller_type == "PD":
        return TuningOutput(
            "PD",
            kp=a * (1.25 + r / 6.0),
            td=td_ * (6.0 - 2.0 * r) / (22.0 + 3.0 * r),
        )
    if controller_type == "PID":
        return TuningOutput(
            "PID",
            kp=a * (1.0 + r / 3.0),
            ti=td_ * (32.0 + 6.0 * r) / (13.0 + 8.0 * r),
            td=td_ * 4.0 / (11.0 + 2.0 * r),
        )
    raise ValueError(f"unknown controller type {controller_type!r}")


def _smooth_edge_padded(u: np.ndarray, window: int) -> np.ndarray:
    if window < 3:
        return u
    if window % 2 == 0:
        window += 1
    half = window // 2
    padded = np.pad(u, half, mode="edge")
    kernel = np.full(window, 1.0 / window)
    return np.convolve(padded, kernel, mode="valid")


def _first_crossing(t: np.ndarray, u: np.ndarray, level: float) -> float:
    """Time of the first upward crossing of `level`, linearly interpolated."""
    above = u >= level
    idx = int(np.argmax(above))
    if not above[idx]:
        raise TuningError(f"response never reaches {level:.1%} of its final value")
    if idx == 0:
        return float(t[0])
    u0, u1 = u[idx - 1], u[idx]
    if u1 == u0:
        return float(t[idx])
    frac = (level - u0) / (u1 - u0)
    return float(t[idx - 1] + frac * (t[idx] - t[idx - 1]))


def fit_fopdt(times, values, input_step: float) -> FopdtModel:
    """Identify an FOPDT model from a single open-loop step response.

    Two-point method: with t1 and t2 the times of the 28.3% and 63.2%
    crossings of the output change, tau_m = 1.5*(t2 - t1) and
    tau_d = t2 - tau_m; K is the steady output change over the input
    step.  Noisy responses are box-smoothed before crossing detection.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.shape != y.shape:
        raise ValueError("times and values must be 1-D arrays of equal length")
    n = t.size
    if n < 10:
        raise TuningError("step response too short to identify")
    if not np.all(np.isfinite(t)) or not np.all(np.isfinite(y)):
        raise ValueError("step response contains non-finite samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    if not (math.isfinite(input_step) and input_step != 0.0):
        raise ValueError("input_step must be finite and non-zero")

    tail_n = max(3, n // 10)
    tail = y[-tail_n:]
    final = float(tail.mean())

    # settled tail: noise from the detrended tail, drift from half-means
    tt = t[-tail_n:] - t[-tail_n]
    coeffs = np.polyfit(tt, tail, 1)
    noise_std = float(np.std(tail - np.polyval(coeffs, tt)))
    half = tail_n // 2
    drift = abs(float(tail[half:].mean()) - float(tail[:half].mean()))

    dt_mean = float((t[-1] - t[0]) / (n - 1))

    def estimate(baseline: float, window: int):
        delta = final - baseline
        if abs(delta) <= max(1e-12, 1e-6 * float(np.max(np.abs(y - baseline)))):
            raise TuningError("flat response: no process gain to identify")
        if drift > max(0.05 * abs(delta), 6.0 * noise_std * math.sqrt(2.0 / max(half, 1))):
            raise TuningError(
                "final segment still drifts; response may be "
                "non-self-regulating or truncated"
            )
        if float(np.max(np.abs(tail - final))) > max(0.05 * abs(delta), 5.0 * noise_std):
            raise TuningError(
                "final segment is not settled beyond the noise band; "
                "response may be non-self-regulating or truncated"
            )
        u = (y - baseline) / delta
        if float(np.max(u)) < 0.95:
            raise TuningError("response has not reached 95% of its final value")
        smoothed = noise_std > 0.005 * abs(delta)
        if smoothed:
            window = max(3, min(window, max(3, n // 4)))
            u = _smooth_edge_padded(u, window)
        t1 = _first_crossing(t, u, _LEVEL1)
        t2 = _first_crossing(t, u, _LEVEL2)
        if not t2 > t1:
            raise TuningError("crossing times are not ordered; response is too distorted")
        tau_m = 1.5 * (t2 - t1)
        tau_d = t2 - tau_m
        if smoothed:
            # box smoothing of a first-order rise delays both crossings by
            # W^2/(24*tau_m), which cancels in tau_m but not in tau_d
            width = window * dt_mean
            tau_d -= width * width / (24.0 * tau_m)
        return tau_m, tau_d, delta

    # pass 1 anchors the baseline on the first samples and a generic
    # smoothing window; pass 2 re-bases on the median of everything inside
    # the estimated dead time (robust to noise without swallowing the rise
    # when the dead time is short relative to the record) and scales the
    # smoothing window to the estimated time constant
    tau_m, tau_d, delta = estimate(float(np.median(y[:3])), int(round(n / 50)))
    pre_n = int(np.searchsorted(t, max(tau_d, 0.0) * 0.8))
    window2 = int(round(tau_m / (5.0 * dt_mean)))
    baseline2 = float(np.median(y[:pre_n])) if pre_n >= 6 else float(np.median(y[:3]))
    tau_m, tau_d, delta = estimate(baseline2, window2)

    if tau_d < 0.0:
        if tau_d < -0.1 * tau_m:
            raise TuningError("identified dead time is strongly negative; bad response shape")
        tau_d = 0.0
    return FopdtModel(gain=delta / input_step, dead_time=tau_d, time_constant=tau_m)


def _hysteresis_crossings(centered: np.ndarray, dt: float, frac: float = 0.25):
    """Zero-crossing times/directions/indices with +-frac*amplitude hysteresis."""
    amp = float(np.max(np.abs(centered)))
    if amp <= 0.0:
        return [], [], []
    h = frac * amp
    times: list[float] = []
    dirs: list[int] = []
    idxs: list[int] = []
    state = 0
    for k in range(centered.size):
        v = centered[k]
        if state == 0:
            if v >= h:
                state = 1
            elif v <= -h:
                state = -1
            continue
        if state == -1 and v >= h:
            i = k - 1
            while i > 0 and centered[i] > 0.0:
                i -= 1
            c0, c1 = centered[i], centered[i + 1]
            fr = 0.0 if c1 == c0 else (0.0 - c0) / (c1 - c0)
            times.append((i + fr) * dt)
            dirs.append(+1)
            idxs.append(k)
            state = 1
        elif state == 1 and v <= -h:
            i = k - 1
            while i > 0 and centered[i] < 0.0:
                i -= 1
            c0, c1 = centered[i], centered[i + 1]
            fr = 0.0 if c1 == c0 else (0.0 - c0) / (c1 - c0)
            times.append((i + fr) * dt)
            dirs.append(-1)
            idxs.append(k)
            state = -1
    return times, dirs, idxs


def measure_oscillation_period(signal, dt: float) -> float:
    """Oscillation period from mean-crossing spacing, with interpolation.

    Uses hysteresis of a quarter of the peak amplitude so noise does not
    inject spurious crossings; the period is the mean spacing of
    same-direction crossings (twice the half-cycle spacing when only
    three crossings exist).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    sig = np.asarray(signal, dtype=float)
    if sig.ndim != 1 or sig.size < 4:
        raise TuningError("signal too short to measure a period")
    centered = sig - sig.mean()
    times, dirs, _ = _hysteresis_crossings(centered, dt)
    if len(times) < 3:
        raise TuningError("fewer than 3 mean-crossings; no oscillation to measure")
    ups = [tm for tm, d in zip(times, dirs) if d > 0]
    downs = [tm for tm, d in zip(times, dirs) if d < 0]
    gaps: list[float] = []
    for series in (ups, downs):
        gaps.extend(np.diff(series))
    if gaps:
        return float(np.mean(gaps))
    return 2.0 * float(np.mean(np.diff(times)))


def _classify_envelope(errors: np.ndarray, dt: float, setpoint: float):
    """Classify a P-probe error series as decaying/sustained/growing.

    Returns (label, window) where window is the analysis segment (the
    last 70%, transient skipped).  Cycle amplitudes are measured between
    consecutive same-direction crossings; their mean consecutive ratio
    against [0.95, 1.05] decides the label.
    """
    n = errors.size
    window = errors[int(0.3 * n):]
    centered = window - window.mean()
    amp = float(np.max(np.abs(centered)))
    if amp < 1e-9 * max(1.0, abs(setpoint)):
        return "decaying", window
    times, dirs, idxs = _hysteresis_crossings(centered, dt)
    up_idx = [i for i, d in zip(idxs, dirs) if d > 0]
    peaks: list[float] = []
    for a, b in zip(up_idx, up_idx[1:]):
        peaks.append(float(np.max(np.abs(centered[a:b]))))
    if len(peaks) < 3:
        third = max(1, centered.size // 3)
        a_first = float(np.max(np.abs(centered[:third])))
        a_last = float(np.max(np.abs(centered[-third:])))
        if a_last <= 0.8 * a_first:
            return "decaying", window
        if a_first <= 0.0 or a_last >= 1.25 * a_first:
            return "growing", window
        raise TuningError("dwell too short to classify the oscillation envelope")
    ratios = [b / a for a, b in zip(peaks, peaks[1:]) if a > 0.0]
    if not ratios:
        return "decaying", window
    mean_ratio = float(np.mean(ratios))
    if mean_ratio < 0.95:
        return "decaying", window
    if mean_ratio > 1.05:
        return "growing", window
    return "sustained", window


def find_ultimate_gain(
    plant,
    kp_range: tuple[float, float] = (0.05, 400.0),
    dwell: float = 6.0,
    on_probe=None,
) -> UltimateGainResult:
    """Search for the proportional gain of sustained oscillation.

    Doubles kp from the bottom of `kp_range` until the error envelope
    grows, then bisects between the last decaying and first growing gain
    until a candidate sits in the sustained band.  The measured period
    must exceed 8 samples: a loop with no phase crossing (no dead time)
    only ever oscillates at the sampling limit, which is rejected.
    """
    kp_lo, kp_hi = float(kp_range[0]), float(kp_range[1])
    if not (0.0 < kp_lo < kp_hi):
        raise ValueError("kp_range must satisfy 0 < min < max")
    if not dwell > 0:
        raise ValueError("dwell must be positive")
    dt = plant.dt
    setpoint = getattr(plant, "setpoint", 1.0)

    def classify(kp: float):
        errors = plant.probe_p(kp, dwell)
        if on_probe is not None:
            on_probe(kp, errors)
        return _classify_envelope(np.asarray(errors, dtype=float), dt, setpoint)

    def result(kp: float, window: np.ndarray) -> UltimateGainResult:
        period = measure_oscillation_period(window, dt)
        if period <= 8.0 * dt:
            raise TuningError(
                "oscillation sits at the sampling limit; the loop has no "
                "phase crossing (dead-time-free lag has no ultimate gain)"
            )
        return UltimateGainResult(ku=kp, tu=period)

    label, window = classify(kp_lo)
    if label == "growing":
        raise TuningError("loop already unstable at the bottom of kp_range")
    if label == "sustained":
        return result(kp_lo, window)

    lo = kp_lo
    hi = None
    kp = kp_lo
    while kp < kp_hi:
        kp = min(kp * 2.0, kp_hi)
        label, window = classify(kp)
        if label == "decaying":
            lo = kp
        elif label == "sustained":
            return result(kp, window)
        else:
            hi = kp
            break
    if hi is None:
        raise TuningError("no sustained oscillation found within kp_range")

    for _ in range(60):
        mid = 0.5 * (lo + hi)
        label, window = classify(mid)
        if label == "sustained":
            return result(mid, window)
        if label == "decaying":
            lo = mid
        else:
            hi = mid
        if (hi - lo) <= 1e-4 * hi:
            break
    raise TuningError("could not isolate a sustained oscillation between the brackets")


@dataclass(frozen=True)
class _StepMetrics:
    overshoot: float
    settling_time: float | None
    sse: float
    oscillatory: bool


def _step_metrics(t: np.ndarray, y: np.ndarray, target: float) -> _StepMetrics:
    u = np.asarray(y, dtype=float) / target
    n = u.size
    overshoot = max(0.0, float(np.max(u)) - 1.0)
    tail = u[-max(3, n // 10):]
    sse = abs(float(tail.mean()) - 1.0)

    dev = np.abs(u - 1.0)
    outside = dev > 0.02
    if outside[-1]:
        settling_time = None
    else:
        last_out = int(np.max(np.nonzero(outside)[0])) if np.any(outside) else -1
        settling_time = float(t[last_out + 1]) if last_out + 1 < n else None

    # oscillatory: several target crossings whose peaks refuse to die down
    err = u - 1.0
    sign = np.sign(err)
    sign[sign == 0] = 1
    flips = np.nonzero(np.diff(sign))[0]
    peaks: list[float] = []
    bounds = [0, *list(flips + 1), n]
    for a, b in zip(bounds, bounds[1:]):
        if b > a:
            peaks.append(float(np.max(dev[a:b])))
    # drop the initial rise segment (before the first crossing)
    peaks = peaks[1:] if len(peaks) > 1 else peaks
    oscillatory = len(peaks) >= 3 and peaks[2] >= 0.5 * peaks[0] and peaks[0] > 0.01
    if float(np.max(np.abs(u))) > 5.0:
        oscillatory = True
    return _StepMetrics(overshoot, settling_time, sse, oscillatory)


def custom_tune(plant, max_iters: int = 40, on_iteration=None) -> TuningOutput:
    """Open-loop characterization plus iterative manual-style adjustment.

    The plant must be self-regulating (its open-loop step must settle);
    an FOPDT fit of that step provides the time constant that scales the
    settling target and the derivative rule.  Gains start at kp = ki =
    0.5, kd = 0 and are adjusted one rule per iteration, most severe
    symptom first — damp oscillation (kp x0.7), then fight persistent
    overshoot (introduce kd = kp*tau_m/8 once, after that reduce kp),
    then drive steady-state error down (ki x1.3), else speed a sluggish
    loop up (kp x1.5) — until overshoot < 10% and the 2% settling time
    is within five time constants.

    The five-time-constant target is deliberate and strict: a plant
    whose dead time or actuator rate limit makes it unreachable gets a
    clean budget-exhausted error rather than a lowered bar.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    t, y = plant.open_loop_step(1.0)
    y = np.asarray(y, dtype=float)
    n = y.size
    tail = y[-max(4, n // 5):]
    half = tail.size // 2
    drift = abs(float(tail[half:].mean()) - float(tail[:half].mean()))
    span = max(np.max(np.abs(y)), 1e-12)
    if drift > 0.02 * span:
        raise TuningError(
            "open-loop step does not settle: plant is not self-regulating"
        )
    model = fit_fopdt(t, y, 1.0)
    tau_m = model.time_constant

    kp, ki, kd = 0.5, 0.5, 0.0
    duration = 12.0 * tau_m + 6.0 * model.dead_time
    target_settle = 5.0 * tau_m
    for iteration in range(1, max_iters + 1):
        gains = PidGains(kp=kp, ki=ki, kd=kd)
        ts, ys = plant.closed_loop_step(gains, duration)
        m = _step_metrics(np.asarray(ts), np.asarray(ys), plant.setpoint)
        if on_iteration is not None:
            on_iteration(iteration, gains, ts, ys, m)
        if (
            m.overshoot < 0.10
            and m.settling_time is not None
            and m.settling_time <= target_settle
        ):
            if kd > 0.0:
                return TuningOutput("PID", kp=kp, ti=kp / ki, td=kd / kp)
            return TuningOutput("PI", kp=kp, ti=kp / ki)
        if m.oscillatory:
            kp *= 0.7
        elif m.overshoot >= 0.10:
            if kd == 0.0:
                kd = kp * tau_m / 8.0
            else:
                kp *= 0.7
        elif m.sse > 0.01:
            ki *= 1.3
        else:
            kp *= 1.5
    raise TuningError(f"no acceptable gains within {max_iters} iterations")
