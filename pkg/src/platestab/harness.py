"""Run drivers, flight-log replay analytics, and the load-budget calculator.

Everything here is plumbing around the library modules: reading and
cleaning flight logs, evaluating the torque-to-payload chain, and
running configured simulation/tuning jobs that write CSV and plain-text
reports into an output directory.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .config import SimConfig
from .plant import (
    FopdtLoop,
    LegMechanism,
    MechanicalLegLoop,
    ServoModel,
    simulate_closed_loop,
)
from .tuning import (
    TuningError,
    TuningOutput,
    cohen_coon_gains,
    custom_tune,
    find_ultimate_gain,
    fit_fopdt,
    zn_gains,
)

__all__ = [
    "FlightLogSample",
    "DeviationReport",
    "LoadBudget",
    "read_flight_log",
    "write_flight_log",
    "analyze_flight_log",
    "load_budget",
    "dof_breakdown",
    "run_simulation",
    "run_tuning",
    "run_replay",
]

_AXES = ("yaw", "pitch", "roll")


@dataclass(frozen=True)
class FlightLogSample:
    """One attitude record: time (s) and yaw/pitch/roll (degrees).

    `base` optionally carries a second sensor's yaw/pitch/roll triple.
    """

    t: float
    yaw: float
    pitch: float
    roll: float
    base: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class DeviationReport:
    """Per-axis deviation-from-zero statistics of a flight log, degrees."""

    max_deg: tuple[float, float, float]
    rms_deg: tuple[float, float, float]
    samples: int
    duration: float

    def __post_init__(self):
        for mx, rms in zip(self.max_deg, self.rms_deg):
            if mx < 0 or rms < 0:
                raise ValueError("deviations must be non-negative")
            if rms > mx + 1e-12:
                raise ValueError("RMS cannot exceed the maximum deviation")
        if self.samples < 1:
            raise ValueError("report needs at least one sample")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")


@dataclass(frozen=True)
class LoadBudget:
    """Torque-to-payload chain for the leg linkage.

    per_link_ideal = torque/crank; effective derates by drivetrain
    efficiency; rated mass = effective/(fos*g) per link, times the leg
    count for the platform total.
    """

    torque: float
    crank: float
    efficiency: float
    fos: float
    legs: int
    g: float
    per_link_ideal: float
    per_link_effective: float
    per_link_rated_mass: float
    total_rated_mass: float


def load_budget(
    torque: float,
    crank: float,
    efficiency: float = 0.85,
    fos: float = 1.5,
    legs: int = 3,
    g: float = 9.81,
) -> LoadBudget:
    """Evaluate the torque-to-payload chain (forces in N, masses in kg)."""
    for name, value in (
        ("torque", torque),
        ("crank", crank),
        ("fos", fos),
        ("g", g),
    ):
        if not (math.isfinite(value) and value > 0):
            raise ValueError(f"{name} must be finite and positive")
    if not 0.0 < efficiency <= 1.0:
        raise ValueError("efficiency must be in (0, 1]")
    if legs < 1:
        raise ValueError("legs must be at least 1")
    ideal = torque / crank
    effective = ideal * efficiency
    per_mass = effective / (fos * g)
    return LoadBudget(
        torque=torque,
        crank=crank,
        efficiency=efficiency,
        fos=fos,
        legs=legs,
        g=g,
        per_link_ideal=ideal,
        per_link_effective=effective,
        per_link_rated_mass=per_mass,
        total_rated_mass=legs * per_mass,
    )


def format_load_budget(budget: LoadBudget) -> str:
    return "\n".join(
        [
            "load budget",
            f"  torque                : {budget.torque:.4g} N*m",
            f"  crank radius          : {budget.crank:.4g} m",
            f"  per-link ideal force  : {budget.per_link_ideal:.4g} N",
            f"  efficiency            : {budget.efficiency:.4g}",
            f"  per-link effective    : {budget.per_link_effective:.4g} N",
            f"  factor of safety      : {budget.fos:.4g}",
            f"  rated mass per link   : {budget.per_link_rated_mass:.4g} kg",
            f"  legs                  : {budget.legs}",
            f"  rated platform mass   : {budget.total_rated_mass:.4g} kg",
        ]
    )


def dof_breakdown(num_links: int, joints) -> tuple[int, str]:
    """Mobility count plus a printable derivation of it."""
    from .kinematics import grubler_dof

    joints = [(int(d), int(c)) for d, c in joints]
    value = grubler_dof(num_links, joints)
    total_joints = sum(c for _, c in joints)
    freedom = sum(d * c for d, c in joints)
    terms = " + ".join(f"{d}*{c}" for d, c in joints) or "0"
    text = "\n".join(
        [
            f"links N = {num_links}, joints J = {total_joints}, "
            f"sum(Fi*Ji) = {terms} = {freedom}",
            f"F_T = 6*(N - 1 - J) + sum(Fi*Ji) "
            f"= 6*({num_links} - 1 - {total_joints}) + {freedom} = {value}",
        ]
    )
    return value, text


# ---------------------------------------------------------------------------
# flight-log replay


def read_flight_log(path) -> tuple[list[FlightLogSample], int]:
    """Read and clean a flight log CSV.

    Header must start `t,yaw,pitch,roll`, optionally followed by
    `base_yaw,base_pitch,base_roll`; angles in degrees.  Rows that are
    short, non-numeric, non-finite, or non-increasing in time are
    dropped.  Returns (samples, dropped_row_count); fewer than two
    usable samples is an error.
    """
    base_cols = ["base_yaw", "base_pitch", "base_roll"]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if header[:4] != ["t", "yaw", "pitch", "roll"]:
            raise ValueError(
                f"{path}: header must start t,yaw,pitch,roll (got {','.join(header[:4])})"
            )
        has_base = header[4:7] == base_cols
        if len(header) > 4 and not has_base:
            raise ValueError(
                f"{path}: columns after roll must be base_yaw,base_pitch,base_roll"
            )
        width = 7 if has_base else 4
        samples: list[FlightLogSample] = []
        dropped = 0
        prev_t = None
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < width:
                dropped += 1
                continue
            try:
                vals = [float(v) for v in row[:width]]
            except ValueError:
                dropped += 1
                continue
            if not all(math.isfinite(v) for v in vals):
                dropped += 1
                continue
            if prev_t is not None and vals[0] <= prev_t:
                dropped += 1
                continue
            prev_t = vals[0]
            base = tuple(vals[4:7]) if has_base else None
            samples.append(FlightLogSample(vals[0], vals[1], vals[2], vals[3], base))
    if len(samples) < 2:
        raise ValueError(f"{path}: fewer than 2 usable samples after cleaning")
    return samples, dropped


def write_flight_log(samples: list[FlightLogSample], path) -> None:
    """Write samples back out in the flight-log CSV schema."""
    has_base = samples[0].base is not None if samples else False
    header = ["t", "yaw", "pitch", "roll"]
    if has_base:
        header += ["base_yaw", "base_pitch", "base_roll"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for s in samples:
            vals = [s.t, s.yaw, s.pitch, s.roll]
            if has_base:
                vals += list(s.base if s.base is not None else (0.0, 0.0, 0.0))
            fh.write(",".join(f"{v:.9g}" for v in vals) + "\n")


def analyze_flight_log(samples: list[FlightLogSample]) -> DeviationReport:
    """Per-axis max and RMS deviation from zero, in degrees."""
    if len(samples) < 2:
        raise ValueError("need at least 2 samples to analyze")
    data = np.array([[s.yaw, s.pitch, s.roll] for s in samples])
    max_deg = tuple(float(v) for v in np.max(np.abs(data), axis=0))
    rms_deg = tuple(float(v) for v in np.sqrt(np.mean(data * data, axis=0)))
    return DeviationReport(
        max_deg=max_deg,
        rms_deg=rms_deg,
        samples=len(samples),
        duration=samples[-1].t - samples[0].t,
    )


def format_deviation_report(report: DeviationReport, dropped: int) -> str:
    lines = [
        "flight-log replay report",
        f"  samples : {report.samples} (dropped {dropped})",
        f"  duration: {report.duration:.6g} s",
    ]
    for i, axis in enumerate(_AXES):
        lines.append(
            f"  {axis:<5}: max |dev| = {report.max_deg[i]:.6g} deg, "
            f"RMS = {report.rms_deg[i]:.6g} deg"
        )
    return "\n".join(lines)


def run_replay(log_path, out_dir, quiet: bool = False) -> DeviationReport:
    """Clean a flight log, report deviations, write the cleaned CSV."""
    samples, dropped = read_flight_log(log_path)
    report = analyze_flight_log(samples)
    os.makedirs(out_dir, exist_ok=True)
    write_flight_log(samples, os.path.join(out_dir, "cleaned.csv"))
    text = format_deviation_report(report, dropped)
    _write(os.path.join(out_dir, "replay_report.txt"), text + "\n")
    with open(os.path.join(out_dir, "replay_summary.csv"), "w", newline="") as fh:
        fh.write("axis,max_deg,rms_deg\n")
        for i, axis in enumerate(_AXES):
            fh.write(f"{axis},{report.max_deg[i]:.9g},{report.rms_deg[i]:.9g}\n")
    if not quiet:
        print(text)
    return report


# ---------------------------------------------------------------------------
# simulation driver


def _write(path, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def summarize_trace(trace) -> dict:
    """Settling time, maximum deviation, and steady-state error of a run.

    Settling uses a +-0.01 rad band on both plate angles; steady state is
    the mean absolute angle over the last tenth of the run.
    """
    t = trace.column("t")
    pitch = trace.column("plate_pitch")
    roll = trace.column("plate_roll")
    n = len(trace)
    tail = slice(max(0, n - max(1, n // 10)), n)
    outside = (np.abs(pitch) > 0.01) | (np.abs(roll) > 0.01)
    if not np.any(outside):
        settle = float(t[0])
    elif outside[-1]:
        settle = None
    else:
        settle = float(t[int(np.max(np.nonzero(outside)[0])) + 1])
    return {
        "rows": n,
        "max_plate_pitch_rad": float(np.max(np.abs(pitch))),
        "max_plate_roll_rad": float(np.max(np.abs(roll))),
        "steady_state_pitch_rad": float(np.mean(np.abs(pitch[tail]))),
        "steady_state_roll_rad": float(np.mean(np.abs(roll[tail]))),
        "settling_time_s": settle,
    }


def run_simulation(cfg: SimConfig, out_dir, seed_override: int | None = None,
                   quiet: bool = False) -> dict:
    """Run the configured closed loop; write trace.csv, summary.txt, summary.csv."""
    seed = cfg.seed if seed_override is None else seed_override
    trace = simulate_closed_loop(
        cfg.gains,
        cfg.disturbance,
        cfg.duration,
        cfg.dt,
        geometry=cfg.geometry,
        plant_kind=cfg.plant_kind,
        servo=cfg.servo,
        fopdt_models=cfg.fopdt_legs,
        output_limits=cfg.output_limits,
        noise_sigma=cfg.noise_sigma,
        seed=seed,
    )
    os.makedirs(out_dir, exist_ok=True)
    trace_path = os.path.join(out_dir, "trace.csv")
    trace.to_csv(trace_path)
    metrics = summarize_trace(trace)
    settle = metrics["settling_time_s"]
    lines = [
        "simulation summary",
        f"  plant    : {cfg.plant_kind}",
        f"  duration : {cfg.duration:.9g} s at dt = {cfg.dt:.9g} s ({metrics['rows']} rows)",
        f"  seed     : {seed}",
        f"  max |plate pitch| : {metrics['max_plate_pitch_rad']:.9g} rad",
        f"  max |plate roll|  : {metrics['max_plate_roll_rad']:.9g} rad",
        f"  steady-state pitch: {metrics['steady_state_pitch_rad']:.9g} rad",
        f"  steady-state roll : {metrics['steady_state_roll_rad']:.9g} rad",
        "  settling time (0.01 rad band): "
        + ("not settled" if settle is None else f"{settle:.9g} s"),
    ]
    text = "\n".join(lines)
    _write(os.path.join(out_dir, "summary.txt"), text + "\n")
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        fh.write("metric,value\n")
        for key in (
            "rows",
            "max_plate_pitch_rad",
            "max_plate_roll_rad",
            "steady_state_pitch_rad",
            "steady_state_roll_rad",
        ):
            fh.write(f"{key},{metrics[key]:.9g}\n")
        fh.write(
            "settling_time_s,"
            + ("" if settle is None else f"{settle:.9g}")
            + "\n"
        )
    if not quiet:
        print(text)
    return {"trace_path": trace_path, "metrics": metrics}


# ---------------------------------------------------------------------------
# tuning driver


def _leg_plant(cfg: SimConfig, leg: int):
    """Probe handle for one leg per the configured plant kind."""
    if cfg.plant_kind == "fopdt":
        return FopdtLoop(cfg.fopdt_legs[leg], dt=cfg.dt)
    mech = LegMechanism(crank=cfg.geometry.crank_length, link=cfg.geometry.link_length)
    servo = ServoModel(
        angle=cfg.geometry.servo_home,
        rate_limit=cfg.servo.rate_limit,
        lag_tau=cfg.servo.lag_tau,
        range=cfg.servo.range,
    )
    return MechanicalLegLoop(
        servo=servo,
        mech=mech,
        home=cfg.geometry.servo_home,
        dt=cfg.dt,
    )


def _probe_csv(out_dir, name: str, t: np.ndarray, y: np.ndarray, ycol: str) -> None:
    with open(os.path.join(out_dir, name), "w", newline="") as fh:
        fh.write(f"t,{ycol}\n")
        for ti, yi in zip(t, y):
            fh.write(f"{ti:.9g},{yi:.9g}\n")


def _gain_fields(out: TuningOutput) -> dict:
    return {
        "controller_type": out.controller_type,
        "kp": out.kp,
        "ki": "" if out.ki is None else out.ki,
        "kd": "" if out.kd is None else out.kd,
        "ti": "" if out.ti is None else out.ti,
        "td": "" if out.td is None else out.td,
    }


def _reference_notes(out: TuningOutput, ref: tuple) -> list[str]:
    """Percent discrepancies of kp/ti/td against user-supplied values."""
    notes = []
    pairs = [("kp", out.kp, ref[0])]
    if len(ref) > 1 and ref[1] is not None:
        pairs.append(("ti", out.ti, ref[1]))
    if len(ref) > 2 and ref[2] is not None:
        pairs.append(("td", out.td, ref[2]))
    for name, ours, theirs in pairs:
        if theirs == 0:
            continue
        if ours is None:
            notes.append(f"    reference {name}={theirs:g}: rule emits no {name}")
        else:
            pct = 100.0 * (ours - theirs) / theirs
            notes.append(
                f"    vs reference {name}={theirs:g}: ours {ours:.6g} ({pct:+.1f}%)"
            )
    return notes


def _leg_context(legno: int, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except TuningError as exc:
        raise TuningError(f"leg {legno}: {exc}") from exc


def run_tuning(
    cfg: SimConfig,
    method: str,
    out_dir,
    quiet: bool = False,
    reference: dict | None = None,
) -> dict:
    """Tune each leg with the selected method; write report, gains CSV, probes.

    `reference` optionally maps leg number (1-based) to (kp, ti, td)
    values to diff against in the report.  Every probe response is
    dumped as CSV for offline inspection.
    """
    if method not in ("zn", "cc", "custom"):
        raise ValueError(f"unknown tuning method {method!r} (expected zn, cc or custom)")
    os.makedirs(out_dir, exist_ok=True)
    reference = reference or {}
    report: list[str] = [f"tuning report (method: {method}, plant: {cfg.plant_kind})"]
    rows: list[dict] = []
    results: dict[int, TuningOutput] = {}

    for leg in range(3):
        legno = leg + 1
        plant = _leg_plant(cfg, leg)
        report.append(f"leg {legno}:")
        row: dict = {"leg": legno, "method": method}
        extra: dict = {}

        if method == "zn":
            probes: list[tuple[float, np.ndarray]] = []
            out, ku = _leg_context(legno, _tune_zn, plant, probes)
            for seq, (kp_probe, errors) in enumerate(probes, start=1):
                t = np.arange(1, len(errors) + 1) * plant.dt
                _probe_csv(
                    out_dir,
                    f"probe_leg{legno}_{seq:02d}_kp{kp_probe:.6g}.csv",
                    t,
                    errors,
                    "error",
                )
            report.append(f"  ultimate gain Ku = {ku.ku:.6g}")
            report.append(f"  critical period tu = {ku.tu:.6g} s")
            report.append(f"  probes dumped: {len(probes)}")
            extra = {"ku": ku.ku, "tu": ku.tu}
        elif method == "cc":
            out, model, probed = _leg_context(legno, _tune_cc, cfg, plant, out_dir, legno)
            source = "probed step response" if probed else "declared model"
            report.append(
                f"  FOPDT ({source}): K = {model.gain:.6g}, "
                f"dead time = {model.dead_time:.6g} s, "
                f"time constant = {model.time_constant:.6g} s"
            )
            report.append(
                "  validity: dead time < 2*time constant: "
                + ("ok" if model.tunable else "VIOLATED")
            )
            extra = {
                "fopdt_gain": model.gain,
                "fopdt_dead_time": model.dead_time,
                "fopdt_time_constant": model.time_constant,
            }
        else:
            iters: list = []

            def on_iteration(i, gains, ts, ys, metrics, _legno=legno, _sink=iters):
                _sink.append((i, gains, ts, ys, metrics))

            out = _leg_context(legno, custom_tune, plant, on_iteration=on_iteration)
            for i, gains, ts, ys, metrics in iters:
                _probe_csv(out_dir, f"probe_leg{legno}_iter{i:02d}.csv", ts, ys, "y")
            last = iters[-1]
            report.append(f"  converged in {len(iters)} iterations")
            report.append(
                f"  final step: overshoot = {last[4].overshoot:.2%}, "
                f"settling = "
                + (
                    "none"
                    if last[4].settling_time is None
                    else f"{last[4].settling_time:.6g} s"
                )
            )
            extra = {"iterations": len(iters)}

        gtxt = f"  {out.controller_type}: kp = {out.kp:.6g}"
        if out.ti is not None:
            gtxt += f", ti = {out.ti:.6g} s (ki = {out.ki:.6g})"
        if out.td is not None:
            gtxt += f", td = {out.td:.6g} s (kd = {out.kd:.6g})"
        report.append(gtxt)
        if legno in reference:
            report.extend(_reference_notes(out, reference[legno]))
        row.update(_gain_fields(out))
        row.update(extra)
        rows.append(row)
        results[legno] = out

    text = "\n".join(report)
    _write(os.path.join(out_dir, "tuning_report.txt"), text + "\n")

    cols = [
        "leg",
        "method",
        "controller_type",
        "kp",
        "ki",
        "kd",
        "ti",
        "td",
        "ku",
        "tu",
        "fopdt_gain",
        "fopdt_dead_time",
        "fopdt_time_constant",
        "iterations",
    ]
    with open(os.path.join(out_dir, "gains.csv"), "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            cells = []
            for c in cols:
                v = row.get(c, "")
                cells.append(f"{v:.9g}" if isinstance(v, float) else str(v))
            fh.write(",".join(cells) + "\n")
    if not quiet:
        print(text)
    return {"results": results, "report_path": os.path.join(out_dir, "tuning_report.txt")}


def _tune_zn(plant, probes: list):
    """Ultimate-gain search plus the closed-loop PID rule row."""

    def on_probe(kp, errors):
        probes.append((kp, np.asarray(errors, dtype=float)))

    ku = find_ultimate_gain(plant, on_probe=on_probe)
    return zn_gains(ku.ku, ku.tu, "PID"), ku


def _tune_cc(cfg: SimConfig, plant, out_dir, legno: int):
    """FOPDT from config (fopdt plant) or a probed step, then the rule table."""
    if cfg.plant_kind == "fopdt":
        model = cfg.fopdt_legs[legno - 1]
        probed = False
    else:
        t, y = plant.open_loop_step(5.0)
        _probe_csv(out_dir, f"probe_leg{legno}_step.csv", t, np.asarray(y), "y")
        model = fit_fopdt(t, y, 5.0)
        probed = True
    return cohen_coon_gains(model, "PID"), model, probed
