"""Closed-loop simulation and PID tuning for a 3-leg parallel-manipulator
payload stabilizer: forward kinematics, median set-point estimation,
per-leg PID control, three tuning procedures, and flight-log replay
analytics.

The simulation core has a compiled backend with a pure-Python fallback;
`backend_name()` reports which one is active (set PLATESTAB_PURE=1 to
force the fallback).
"""
from ._backend import backend_name
from .config import (
    ConfigError,
    SimConfig,
    default_config,
    load_config,
    parse_config,
    serialize_config,
)
from .estimator import (
    SetPointDecision,
    error_signals,
    estimate_state,
    median_setpoint,
    setpoint_decision,
)
from .harness import (
    DeviationReport,
    FlightLogSample,
    LoadBudget,
    analyze_flight_log,
    dof_breakdown,
    load_budget,
    read_flight_log,
    run_replay,
    run_simulation,
    run_tuning,
    summarize_trace,
)
from .kinematics import (
    EulerAngles,
    HomogeneousTransform,
    PlatformGeometry,
    RobotState,
    Vec3,
    ball_joint_positions,
    compose,
    default_geometry,
    grubler_dof,
    rotation_transform,
    translation_transform,
)
from .pid import PidController, PidGains, output_to_servo_angle
from .plant import (
    TRACE_COLUMNS,
    DisturbanceProfile,
    FopdtLoop,
    FopdtSim,
    LegMechanism,
    MechanicalLegLoop,
    ServoModel,
    SimulationTrace,
    delay_steps,
    fopdt_step,
    leg_z,
    plate_from_leg_heights,
    servo_update,
    simulate_closed_loop,
)
from .tuning import (
    FopdtModel,
    TuningError,
    TuningOutput,
    UltimateGainResult,
    cohen_coon_gains,
    custom_tune,
    find_ultimate_gain,
    fit_fopdt,
    measure_oscillation_period,
    zn_gains,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "backend_name",
    # kinematics
    "EulerAngles",
    "Vec3",
    "HomogeneousTransform",
    "PlatformGeometry",
    "RobotState",
    "default_geometry",
    "grubler_dof",
    "rotation_transform",
    "translation_transform",
    "compose",
    "ball_joint_positions",
    # estimator
    "SetPointDecision",
    "median_setpoint",
    "error_signals",
    "estimate_state",
    "setpoint_decision",
    # pid
    "PidGains",
    "PidController",
    "output_to_servo_angle",
    # tuning
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
    # plant
    "ServoModel",
    "servo_update",
    "LegMechanism",
    "leg_z",
    "plate_from_leg_heights",
    "delay_steps",
    "FopdtSim",
    "fopdt_step",
    "DisturbanceProfile",
    "SimulationTrace",
    "TRACE_COLUMNS",
    "simulate_closed_loop",
    "FopdtLoop",
    "MechanicalLegLoop",
    # config
    "SimConfig",
    "ConfigError",
    "parse_config",
    "load_config",
    "serialize_config",
    "default_config",
    # harness
    "FlightLogSample",
    "DeviationReport",
    "LoadBudget",
    "read_flight_log",
    "analyze_flight_log",
    "load_budget",
    "dof_breakdown",
    "run_simulation",
    "run_tuning",
    "run_replay",
    "summarize_trace",
]
