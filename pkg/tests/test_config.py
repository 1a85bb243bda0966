"""INI configuration parsing, validation, and round-trip serialization."""
import pytest

from platestab import (
    ConfigError,
    FopdtModel,
    PidGains,
    default_config,
    load_config,
    parse_config,
    serialize_config,
)


def test_empty_text_is_the_default_config():
    cfg = parse_config("")
    assert cfg == default_config()
    assert cfg.plant_kind == "mechanistic"
    assert cfg.fopdt_legs is None
    assert cfg.gains == (PidGains(14.0, 900.0, 0.0),) * 3
    assert cfg.output_limits == (-45.0, 45.0)
    assert cfg.duration == 10.0
    assert cfg.dt == 0.005
    assert cfg.seed == 0
    assert cfg.noise_sigma == 0.0
    assert cfg.disturbance.kind == "sine"
    assert cfg.disturbance.pitch_amplitude == 0.1
    assert cfg.geometry.crank_length == 15.0
    assert cfg.servo.rate_limit == 600.0


def test_parse_serialize_round_trip_is_identity():
    cfg = parse_config(
        """
        [geometry]
        joint_radius = 35.5
        joint_angles = 80, 200, 320
        [gains.leg2]
        kp = 3.25
        ki = 120.0
        [run]
        duration = 4.0
        seed =
        [noise]
        sigma = 0.015
        """
    )
    assert cfg.seed is None
    again = parse_config(serialize_config(cfg))
    assert again == cfg


def test_fopdt_config_round_trip():
    text = """
    [plant]
    kind = fopdt
    [plant.fopdt.leg1]
    gain = 2.9
    dead_time = 0.07
    time_constant = 0.47
    [plant.fopdt.leg3]
    gain = 1.4
    """
    cfg = parse_config(text)
    assert cfg.plant_kind == "fopdt"
    assert cfg.fopdt_legs[0] == FopdtModel(2.9, 0.07, 0.47)
    assert cfg.fopdt_legs[1] == FopdtModel(2.0, 0.02, 0.1)  # section defaults
    assert cfg.fopdt_legs[2].gain == 1.4
    assert parse_config(serialize_config(cfg)) == cfg


def test_unknown_section_and_key_are_fatal():
    with pytest.raises(ConfigError, match=r"unknown config section \[motor\]"):
        parse_config("[motor]\nspeed = 1\n")
    with pytest.raises(ConfigError, match=r"\[run\] unknown key 'tempo'"):
        parse_config("[run]\ntempo = 9\n")
    with pytest.raises(ConfigError, match="DEFAULT"):
        parse_config("[DEFAULT]\nduration = 1\n")
    with pytest.raises(ConfigError, match="config syntax"):
        parse_config("duration = 1\n")  # key before any section header


def test_errors_name_the_offending_field():
    with pytest.raises(ConfigError, match=r"\[run\] dt must be positive"):
        parse_config("[run]\ndt = -0.005\n")
    with pytest.raises(ConfigError, match=r"\[run\] duration"):
        parse_config("[run]\nduration = inf\n")
    with pytest.raises(ConfigError, match=r"\[run\] seed"):
        parse_config("[run]\nseed = soon\n")
    with pytest.raises(ConfigError, match=r"\[noise\] sigma"):
        parse_config("[noise]\nsigma = -0.1\n")
    with pytest.raises(ConfigError, match=r"\[geometry\] joint_angles"):
        parse_config("[geometry]\njoint_angles = 90, 210\n")
    with pytest.raises(ConfigError, match=r"\[geometry\]"):
        parse_config("[geometry]\nlink_length = 10.0\n")  # below the crank
    with pytest.raises(ConfigError, match=r"\[gains.leg2\]"):
        parse_config("[gains.leg2]\nkp = -1.0\n")
    with pytest.raises(ConfigError, match=r"\[pid\] output_min"):
        parse_config("[pid]\noutput_min = 45\noutput_max = -45\n")
    with pytest.raises(ConfigError, match=r"\[plant\] kind"):
        parse_config("[plant]\nkind = linear\n")
    with pytest.raises(ConfigError, match=r"\[disturbance\]"):
        parse_config("[disturbance]\nkind = impulse\n")
    with pytest.raises(ConfigError, match=r"\[run\]"):
        parse_config("[run]\nduration = 0.001\n")  # under one dt


def test_config_error_is_a_value_error():
    assert issubclass(ConfigError, ValueError)


def test_fopdt_sections_require_fopdt_kind():
    with pytest.raises(ConfigError, match="only valid when"):
        parse_config("[plant.fopdt.leg1]\ngain = 2.0\n")


def test_seed_forms():
    assert parse_config("[run]\nseed = 42\n").seed == 42
    assert parse_config("[run]\nseed =\n").seed is None
    assert parse_config("[run]\nseed = none\n").seed is None


def test_inline_comments_are_stripped():
    cfg = parse_config("[run]\nduration = 5.0 ; five seconds\ndt = 0.01 # coarse\n")
    assert cfg.duration == 5.0
    assert cfg.dt == 0.01


def test_geometry_section_builds_joint_ring():
    cfg = parse_config("[geometry]\njoint_radius = 10.0\njoint_angles = 0, 120, 240\n")
    j = cfg.geometry.joint_top
    assert j[0].x == pytest.approx(10.0, abs=1e-12)
    assert j[0].y == pytest.approx(0.0, abs=1e-12)
    assert j[1].x == pytest.approx(-5.0, abs=1e-9)
    assert j[1].y == pytest.approx(10.0 * 0.75**0.5, abs=1e-9)
    assert all(v.z == 0.0 for v in j)


def test_load_config_resolves_samples_path(tmp_path):
    (tmp_path / "flight.csv").write_text("t,yaw,pitch,roll\n0,0,1,0\n1,0,2,0\n")
    cfg_path = tmp_path / "run.ini"
    cfg_path.write_text("[disturbance]\nkind = recorded\nsamples_path = flight.csv\n")
    cfg = load_config(cfg_path)
    assert cfg.disturbance.kind == "recorded"
    assert cfg.disturbance.samples_path == str(tmp_path / "flight.csv")


def test_load_config_missing_file():
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config("/nonexistent/run.ini")


def test_recorded_kind_requires_samples_path():
    with pytest.raises(ConfigError, match=r"\[disturbance\]"):
        parse_config("[disturbance]\nkind = recorded\n")


def test_bundled_default_config_parses(tmp_path):
    import pathlib

    bundled = pathlib.Path(__file__).resolve().parents[1] / "configs" / "default.ini"
    cfg = load_config(bundled)
    assert cfg == default_config()
