"""Median set-point selection and per-leg error signals."""
import math

import numpy as np
import pytest

from platestab import (
    EulerAngles,
    PidController,
    PidGains,
    SetPointDecision,
    ball_joint_positions,
    default_geometry,
    error_signals,
    estimate_state,
    median_setpoint,
    setpoint_decision,
)


def test_median_of_distinct_triple():
    assert median_setpoint((12.0, 10.0, 11.0)) == (11.0, 2)


def test_median_all_equal_breaks_to_lowest_index():
    assert median_setpoint((5.0, 5.0, 5.0)) == (5.0, 0)


def test_median_two_way_ties():
    assert median_setpoint((7.0, 7.0, 3.0)) == (7.0, 0)
    assert median_setpoint((3.0, 7.0, 7.0)) == (7.0, 1)
    assert median_setpoint((7.0, 3.0, 7.0)) == (7.0, 0)


def test_median_matches_sorting_oracle():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        z = tuple(rng.uniform(-50.0, 50.0, size=3))
        value, idx = median_setpoint(z)
        assert value == sorted(z)[1]
        assert z[idx] == value


def test_median_rejects_non_finite():
    with pytest.raises(ValueError):
        median_setpoint((1.0, math.nan, 2.0))
    with pytest.raises(ValueError):
        median_setpoint((1.0, math.inf, 2.0))


def test_error_signals_symmetric_offsets():
    assert error_signals(10.0, (8.0, 10.0, 12.0)) == (2.0, 0.0, -2.0)


def test_error_signals_at_setpoint():
    assert error_signals(10.0, (10.0, 10.0, 10.0)) == (0.0, 0.0, 0.0)


def test_error_magnitudes_match_absolute_form():
    rng = np.random.default_rng(4)
    for _ in range(200):
        z = tuple(rng.uniform(-20.0, 20.0, size=3))
        zt = float(rng.uniform(-20.0, 20.0))
        errors = error_signals(zt, z)
        for e, zj in zip(errors, z):
            assert abs(e) == pytest.approx(abs(zt - zj), abs=0.0)


def test_error_signals_reject_non_finite():
    with pytest.raises(ValueError):
        error_signals(math.nan, (1.0, 2.0, 3.0))
    with pytest.raises(ValueError):
        error_signals(1.0, (1.0, 2.0, math.inf))


def test_errors_translation_invariant():
    rng = np.random.default_rng(17)
    for _ in range(200):
        z = rng.uniform(-20.0, 20.0, size=3)
        c = float(rng.uniform(-100.0, 100.0))
        base = setpoint_decision(tuple(z))
        shifted = setpoint_decision(tuple(z + c))
        assert shifted.stationary_leg == base.stationary_leg
        for a, b in zip(shifted.errors, base.errors):
            assert a == pytest.approx(b, abs=1e-9)


def test_median_permutation_equivariant():
    rng = np.random.default_rng(23)
    for _ in range(200):
        z = list(rng.uniform(-20.0, 20.0, size=3))
        value, idx = median_setpoint(z)
        perm = rng.permutation(3)
        pvalue, pidx = median_setpoint([z[p] for p in perm])
        assert pvalue == value
        assert z[perm[pidx]] == value


def test_exactly_one_stationary_leg():
    """One leg always carries exactly zero error, so its controller idles."""
    rng = np.random.default_rng(31)
    geo = default_geometry()
    for _ in range(300):
        angles = EulerAngles(0.0, *rng.uniform(-0.3, 0.3, size=2))
        decision = setpoint_decision(estimate_state(angles, geo).z)
        zero_count = sum(1 for e in decision.errors if e == 0.0)
        assert zero_count >= 1
        assert decision.errors[decision.stationary_leg] == 0.0
    # a zero-state controller fed that zero error produces zero output
    ctrl = PidController(PidGains(kp=3.0, ki=20.0, kd=0.5))
    assert ctrl.step(0.0) == 0.0


def test_setpoint_decision_fields():
    z = (10.0, 14.0, 12.0)
    decision = setpoint_decision(z)
    assert decision.z_target == 12.0
    assert decision.stationary_leg == 2
    assert decision.z_target == z[decision.stationary_leg]
    assert decision.errors == (2.0, -2.0, 0.0)


def test_setpoint_decision_invariants_enforced():
    with pytest.raises(ValueError):
        SetPointDecision(z_target=1.0, stationary_leg=0, errors=(0.5, 0.0, 0.0))
    with pytest.raises(ValueError):
        SetPointDecision(z_target=1.0, stationary_leg=5, errors=(0.0, 0.0, 0.0))


def test_estimate_state_delegates_to_kinematics():
    geo = default_geometry()
    angles = EulerAngles(0.02, -0.1, 0.07)
    a = estimate_state(angles, geo, timestamp=1.25)
    b = ball_joint_positions(angles, geo, timestamp=1.25)
    assert a == b


def test_estimate_state_home_heights():
    geo = default_geometry()
    state = estimate_state(EulerAngles(), geo)
    assert state.z == (geo.base_height,) * 3


def test_pitch_tilt_keeps_on_axis_joint_stationary():
    # the first joint sits on the pitch axis (x = 0), so a pure pitch tilt
    # moves only the other two, symmetrically, and the median picks it
    geo = default_geometry()
    state = estimate_state(EulerAngles(0.0, 0.08, 0.0), geo)
    z = state.z
    assert z[0] == pytest.approx(geo.base_height, abs=1e-12)
    assert z[1] != pytest.approx(z[2], abs=1e-6)
    decision = setpoint_decision(z)
    assert decision.stationary_leg == 0
    assert decision.errors[1] == pytest.approx(-decision.errors[2], abs=1e-9)
