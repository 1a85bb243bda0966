"""Configuration for simulation and tuning runs.

INI-style files (stdlib configparser) with strict validation: unknown
sections or keys are fatal, every value is range-checked, and parse ->
serialize -> parse is the identity.  Every key has a default, so an
empty file is a valid configuration.

Sections and keys (units in comments):

    [geometry]   joint_radius (mm), joint_angles (deg, three values),
                 base_height (mm), crank_length (mm), link_length (mm),
                 servo_home (deg)
    [servo]      rate_limit (deg/s), lag_tau (s), min_angle, max_angle (deg)
    [plant]      kind = mechanistic | fopdt
    [plant.fopdt.legN]  gain, dead_time (s), time_constant (s)  (N = 1..3,
                 required when kind = fopdt)
    [gains.legN] kp, ki, kd
    [pid]        output_min, output_max (deg)
    [disturbance] kind = step | sine | recorded, yaw/pitch/roll_amplitude
                 (rad), start_time (s), freq_low/freq_high (Hz),
                 sweep_time (s), samples_path (CSV for recorded)
    [run]        duration (s), dt (s), seed (int, blank = unseeded)
    [noise]      sigma (rad, on measured plate pitch/roll)
"""
from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass

from .kinematics import PlatformGeometry, Vec3
from .pid import PidGains
from .plant import DisturbanceProfile, ServoModel
from .tuning import FopdtModel

__all__ = [
    "ConfigError",
    "SimConfig",
    "parse_config",
    "load_config",
    "serialize_config",
    "default_config",
]


class ConfigError(ValueError):
    """A configuration file failed validation; the message names the field."""


@dataclass(frozen=True)
class SimConfig:
    """A fully validated run configuration.

    Scalar fields mirror the file keys; `geometry` and `servo` are the
    constructed objects the simulation consumes.
    """

    joint_radius: float
    joint_bearings: tuple[float, float, float]
    geometry: PlatformGeometry
    servo: ServoModel
    plant_kind: str
    fopdt_legs: tuple[FopdtModel, FopdtModel, FopdtModel] | None
    gains: tuple[PidGains, PidGains, PidGains]
    output_limits: tuple[float, float]
    disturbance: DisturbanceProfile
    duration: float
    dt: float
    seed: int | None
    noise_sigma: float


_DEFAULTS = {
    "geometry": {
        "joint_radius": "40.0",
        "joint_angles": "90.0, 210.0, 330.0",
        "base_height": "88.89",
        "crank_length": "15.0",
        "link_length": "79.0",
        "servo_home": "45.0",
    },
    "servo": {
        "rate_limit": "600.0",
        "lag_tau": "0.02",
        "min_angle": "0.0",
        "max_angle": "180.0",
    },
    "plant": {"kind": "mechanistic"},
    "pid": {"output_min": "-45.0", "output_max": "45.0"},
    "disturbance": {
        "kind": "sine",
        "yaw_amplitude": "0.0",
        "pitch_amplitude": "0.1",
        "roll_amplitude": "0.1",
        "start_time": "1.0",
        "freq_low": "0.5",
        "freq_high": "0.5",
        "sweep_time": "10.0",
        "samples_path": "",
    },
    "run": {"duration": "10.0", "dt": "0.005", "seed": "0"},
    "noise": {"sigma": "0.0"},
}
# one default gain set for all legs; see default_config()
_DEFAULT_GAINS = {"kp": "14.0", "ki": "900.0", "kd": "0.0"}
_DEFAULT_FOPDT = {"gain": "2.0", "dead_time": "0.02", "time_constant": "0.1"}

_LEG_SECTIONS = tuple(f"gains.leg{i}" for i in (1, 2, 3))
_FOPDT_SECTIONS = tuple(f"plant.fopdt.leg{i}" for i in (1, 2, 3))
_KNOWN_SECTIONS = set(_DEFAULTS) | set(_LEG_SECTIONS) | set(_FOPDT_SECTIONS)


class _Section:
    """One raw config section with typed, error-naming accessors."""

    def __init__(self, name: str, raw: dict, defaults: dict):
        self.name = name
        self.raw = dict(raw)
        self.defaults = defaults
        unknown = set(self.raw) - set(defaults)
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"[{name}] unknown key {key!r}")

    def text(self, key: str) -> str:
        return self.raw.get(key, self.defaults[key]).strip()

    def number(self, key: str) -> float:
        raw = self.text(key)
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key}: not a number: {raw!r}") from None
        if not math.isfinite(value):
            raise ConfigError(f"[{self.name}] {key}: must be finite")
        return value

    def positive(self, key: str) -> float:
        value = self.number(key)
        if not value > 0:
            raise ConfigError(f"[{self.name}] {key} must be positive")
        return value

    def non_negative(self, key: str) -> float:
        value = self.number(key)
        if value < 0:
            raise ConfigError(f"[{self.name}] {key} must be >= 0")
        return value

    def numbers(self, key: str, count: int) -> tuple[float, ...]:
        raw = self.text(key)
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if len(parts) != count:
            raise ConfigError(f"[{self.name}] {key}: expected {count} comma-separated values")
        out = []
        for p in parts:
            try:
                out.append(float(p))
            except ValueError:
                raise ConfigError(f"[{self.name}] {key}: not a number: {p!r}") from None
        return tuple(out)

    def integer_or_none(self, key: str) -> int | None:
        raw = self.text(key)
        if raw == "" or raw.lower() == "none":
            return None
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key}: not an integer: {raw!r}") from None


def _ring_joints(radius: float, bearings: tuple[float, ...]) -> tuple[Vec3, Vec3, Vec3]:
    joints = []
    for bearing in bearings:
        a = math.radians(bearing)
        joints.append(Vec3(radius * math.cos(a), radius * math.sin(a), 0.0))
    return tuple(joints)


def parse_config(text: str, base_dir: str | None = None) -> SimConfig:
    """Parse and validate a configuration from INI text.

    Relative `samples_path` entries resolve against `base_dir` when given
    (load_config passes the config file's directory).
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    if cp.defaults():
        raise ConfigError("a [DEFAULT] section is not supported")
    for name in cp.sections():
        if name not in _KNOWN_SECTIONS:
            raise ConfigError(f"unknown config section [{name}]")

    def section(name: str, defaults: dict) -> _Section:
        raw = dict(cp[name]) if cp.has_section(name) else {}
        return _Section(name, raw, defaults)

    geo = section("geometry", _DEFAULTS["geometry"])
    radius = geo.positive("joint_radius")
    bearings = geo.numbers("joint_angles", 3)
    try:
        geometry = PlatformGeometry(
            joint_top=_ring_joints(radius, bearings),
            base_height=geo.number("base_height"),
            crank_length=geo.positive("crank_length"),
            link_length=geo.positive("link_length"),
            servo_home=geo.number("servo_home"),
        )
    except ValueError as exc:
        raise ConfigError(f"[geometry] {exc}") from None

    srv = section("servo", _DEFAULTS["servo"])
    lo, hi = srv.number("min_angle"), srv.number("max_angle")
    try:
        servo = ServoModel(
            angle=geometry.servo_home,
            rate_limit=srv.positive("rate_limit"),
            lag_tau=srv.positive("lag_tau"),
            range=(lo, hi),
        )
    except ValueError as exc:
        raise ConfigError(f"[servo] {exc}") from None

    plant_sec = section("plant", _DEFAULTS["plant"])
    plant_kind = plant_sec.text("kind")
    if plant_kind not in ("mechanistic", "fopdt"):
        raise ConfigError(f"[plant] kind must be mechanistic or fopdt, got {plant_kind!r}")
    fopdt_legs = None
    if plant_kind == "fopdt":
        models = []
        for name in _FOPDT_SECTIONS:
            leg = section(name, _DEFAULT_FOPDT)
            try:
                models.append(
                    FopdtModel(
                        gain=leg.number("gain"),
                        dead_time=leg.non_negative("dead_time"),
                        time_constant=leg.positive("time_constant"),
                    )
                )
            except ValueError as exc:
                raise ConfigError(f"[{name}] {exc}") from None
        fopdt_legs = tuple(models)
    else:
        for name in _FOPDT_SECTIONS:
            if cp.has_section(name):
                raise ConfigError(f"[{name}] only valid when [plant] kind = fopdt")

    gains = []
    for name in _LEG_SECTIONS:
        leg = section(name, _DEFAULT_GAINS)
        try:
            gains.append(
                PidGains(
                    kp=leg.non_negative("kp"),
                    ki=leg.non_negative("ki"),
                    kd=leg.non_negative("kd"),
                )
            )
        except ValueError as exc:
            raise ConfigError(f"[{name}] {exc}") from None

    pid_sec = section("pid", _DEFAULTS["pid"])
    out_lo = pid_sec.number("output_min")
    out_hi = pid_sec.number("output_max")
    if not out_lo < out_hi:
        raise ConfigError("[pid] output_min must be below output_max")

    dist = section("disturbance", _DEFAULTS["disturbance"])
    dist_kind = dist.text("kind")
    samples_path = dist.text("samples_path") or None
    if samples_path and base_dir and not os.path.isabs(samples_path):
        samples_path = os.path.join(base_dir, samples_path)
    try:
        profile = DisturbanceProfile(
            kind=dist_kind,
            yaw_amplitude=dist.number("yaw_amplitude"),
            pitch_amplitude=dist.number("pitch_amplitude"),
            roll_amplitude=dist.number("roll_amplitude"),
            start_time=dist.non_negative("start_time"),
            freq_low=dist.number("freq_low"),
            freq_high=dist.number("freq_high"),
            sweep_time=dist.number("sweep_time"),
            samples_path=samples_path,
        )
    except (ValueError, OSError) as exc:
        raise ConfigError(f"[disturbance] {exc}") from None

    run = section("run", _DEFAULTS["run"])
    duration = run.number("duration")
    if not duration > 0:
        raise ConfigError("[run] duration must be positive")
    dt = run.number("dt")
    if not dt > 0:
        raise ConfigError("[run] dt must be positive")
    if int(round(duration / dt)) < 1:
        raise ConfigError("[run] duration must cover at least one dt")
    seed = run.integer_or_none("seed")

    noise = section("noise", _DEFAULTS["noise"])
    sigma = noise.non_negative("sigma")

    return SimConfig(
        joint_radius=radius,
        joint_bearings=bearings,
        geometry=geometry,
        servo=servo,
        plant_kind=plant_kind,
        fopdt_legs=fopdt_legs,
        gains=tuple(gains),
        output_limits=(out_lo, out_hi),
        disturbance=profile,
        duration=duration,
        dt=dt,
        seed=seed,
        noise_sigma=sigma,
    )


def load_config(path) -> SimConfig:
    """Parse a config file; relative data paths resolve against its directory."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))


def default_config() -> SimConfig:
    """The built-in configuration (all file keys at their defaults)."""
    return parse_config("")


def _fmt(value: float) -> str:
    return repr(float(value))


def serialize_config(cfg: SimConfig) -> str:
    """Render a SimConfig back to INI text; parse(serialize(c)) == c."""
    lines: list[str] = []

    def put(section: str, items: dict) -> None:
        lines.append(f"[{section}]")
        for key, val in items.items():
            lines.append(f"{key} = {val}")
        lines.append("")

    put(
        "geometry",
        {
            "joint_radius": _fmt(cfg.joint_radius),
            "joint_angles": ", ".join(_fmt(b) for b in cfg.joint_bearings),
            "base_height": _fmt(cfg.geometry.base_height),
            "crank_length": _fmt(cfg.geometry.crank_length),
            "link_length": _fmt(cfg.geometry.link_length),
            "servo_home": _fmt(cfg.geometry.servo_home),
        },
    )
    put(
        "servo",
        {
            "rate_limit": _fmt(cfg.servo.rate_limit),
            "lag_tau": _fmt(cfg.servo.lag_tau),
            "min_angle": _fmt(cfg.servo.range[0]),
            "max_angle": _fmt(cfg.servo.range[1]),
        },
    )
    put("plant", {"kind": cfg.plant_kind})
    if cfg.plant_kind == "fopdt" and cfg.fopdt_legs is not None:
        for name, model in zip(_FOPDT_SECTIONS, cfg.fopdt_legs):
            put(
                name,
                {
                    "gain": _fmt(model.gain),
                    "dead_time": _fmt(model.dead_time),
                    "time_constant": _fmt(model.time_constant),
                },
            )
    for name, g in zip(_LEG_SECTIONS, cfg.gains):
        put(name, {"kp": _fmt(g.kp), "ki": _fmt(g.ki), "kd": _fmt(g.kd)})
    put(
        "pid",
        {
            "output_min": _fmt(cfg.output_limits[0]),
            "output_max": _fmt(cfg.output_limits[1]),
        },
    )
    d = cfg.disturbance
    put(
        "disturbance",
        {
            "kind": d.kind,
            "yaw_amplitude": _fmt(d.yaw_amplitude),
            "pitch_amplitude": _fmt(d.pitch_amplitude),
            "roll_amplitude": _fmt(d.roll_amplitude),
            "start_time": _fmt(d.start_time),
            "freq_low": _fmt(d.freq_low),
            "freq_high": _fmt(d.freq_high),
            "sweep_time": _fmt(d.sweep_time),
            "samples_path": d.samples_path or "",
        },
    )
    put(
        "run",
        {
            "duration": _fmt(cfg.duration),
            "dt": _fmt(cfg.dt),
            "seed": "" if cfg.seed is None else str(cfg.seed),
        },
    )
    put("noise", {"sigma": _fmt(cfg.noise_sigma)})
    return "\n".join(lines)
