import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaysim.antenna_scan_wca import make_scan_result
from relaysim.follower_control import (
    STOP_COMMAND,
    ControlParams,
    Mode,
    background_velocity,
    follower_step,
    stop_decision,
    wheel_velocities,
)
from relaysim.obstacle_avoidance import (
    AvoidanceParams,
    Situation,
    SonarScan,
    escape_direction,
)
from relaysim.sim_engine import Pose, RobotState

PARAMS = ControlParams()
AVOID = AvoidanceParams()

# dyadic grid keeps the wheel additions exact so the sum identity is
# testable with == rather than a tolerance
dyadic = st.integers(-400 * 1024, 400 * 1024).map(lambda k: k / 1024.0)


def sonar_uniform(d, n=8, fov=math.pi, max_range=10.0):
    import numpy as np
    angles = np.linspace(-fov / 2, fov / 2, n)
    return SonarScan(beams=tuple((float(a), d) for a in angles),
                     max_range=max_range, count=n)


def follower(center=0.0, prev=None, behind=None):
    return RobotState(name="f1", pose=Pose(0.0, 0.0, 0.0), role="follower",
                      antenna_center=center, scan_prev_bearing=prev,
                      rssi_behind=behind)


def test_background_velocity_weak_signal():
    assert background_velocity(-40.0, PARAMS) == 250.0


def test_background_velocity_clamps_to_zero():
    assert background_velocity(-15.0, PARAMS) == 0.0
    assert background_velocity(-10.0, PARAMS) == 0.0


def test_background_velocity_balance_point_is_zero():
    # omega1*|rssi| == omega2 exactly
    assert background_velocity(-15.0, ControlParams(omega1=10.0,
                                                    omega2=150.0)) == 0.0


def test_background_velocity_clamps_to_v_max():
    assert background_velocity(-100.0, PARAMS) == PARAMS.v_max


@given(st.floats(-120.0, -1.0))
@settings(max_examples=200, deadline=None)
def test_background_velocity_bounded(rssi):
    v = background_velocity(rssi, PARAMS)
    assert 0.0 <= v <= PARAMS.v_max


def test_wheel_velocities_straight():
    cmd = wheel_velocities(0.0, 0.0, 200.0, PARAMS)
    assert (cmd.v_left, cmd.v_right) == (200.0, 200.0)


def test_wheel_velocities_steady_bearing():
    cmd = wheel_velocities(0.5, 0.5, 200.0, PARAMS)
    assert (cmd.v_left, cmd.v_right) == (200.5, 199.5)


def test_wheel_velocities_pure_rotation():
    cmd = wheel_velocities(0.5, 0.5, 0.0, PARAMS)
    assert cmd.v_left == -cmd.v_right
    assert cmd.v_left == 0.5


def test_wheel_velocities_derivative_kick():
    cmd = wheel_velocities(0.5, 0.0, 100.0, PARAMS)
    assert cmd.v_left == pytest.approx(100.0 + 0.5 + 0.3 * 0.5, abs=1e-12)


@given(dyadic, dyadic, dyadic)
@settings(max_examples=300, deadline=None)
def test_wheel_sum_identity(theta, prev, v):
    params = ControlParams(kp=2.0, kd=0.5)
    cmd = wheel_velocities(theta, prev, v, params)
    assert cmd.v_left + cmd.v_right == 2.0 * v


@given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0), st.floats(0.0, 400.0))
@settings(max_examples=200, deadline=None)
def test_wheel_turn_sign_follows_steering(theta, prev, v):
    cmd = wheel_velocities(theta, prev, v, PARAMS)
    steer = PARAMS.kp * theta + PARAMS.kd * (theta - prev)
    assert math.copysign(1.0, cmd.v_left - cmd.v_right) == \
        math.copysign(1.0, steer) or cmd.v_left == cmd.v_right


def test_stop_when_leader_close():
    assert stop_decision(-20.0, None, PARAMS) is Mode.STOP


def test_drive_when_leader_far_and_rear_strong():
    p = ControlParams(threshold_l=-30.0, threshold_b=-40.0)
    assert stop_decision(-35.0, -30.0, p) is Mode.DRIVE


def test_stop_when_rear_link_weak():
    p = ControlParams(threshold_l=-30.0, threshold_b=-40.0)
    assert stop_decision(-60.0, -45.0, p) is Mode.STOP
    assert stop_decision(-60.0, -40.0, p) is Mode.STOP


def test_rear_side_ignored_without_rear_neighbor():
    assert stop_decision(-60.0, None, PARAMS) is Mode.DRIVE


def test_follower_step_stop_still_updates_center():
    scan = make_scan_result([-0.2, 0.1, 0.4], [-20.0, -10.0, -18.0], 1.0)
    state = follower(center=0.1)
    cmd, new = follower_step(state, scan, sonar_uniform(10.0), PARAMS, AVOID)
    assert cmd == STOP_COMMAND
    assert new.mode is Mode.STOP
    assert new.wheels == STOP_COMMAND
    assert new.antenna_center != state.antenna_center
    assert new.antenna_center == new.bearing_est


def test_follower_step_free_drives_on_raw_estimate():
    scan = make_scan_result([-0.2, 0.0, 0.2], [-50.0, -40.0, -45.0], 1.0)
    cmd, new = follower_step(follower(), scan, sonar_uniform(10.0),
                             PARAMS, AVOID)
    assert new.mode is Mode.DRIVE
    assert new.situation is Situation.FREE
    assert cmd.v_left + cmd.v_right == pytest.approx(2 * 250.0, abs=1e-9)
    assert cmd.v_left > cmd.v_right  # estimate sits right of center


def test_follower_step_first_step_has_no_derivative_kick():
    scan = make_scan_result([-0.2, 0.0, 0.2], [-50.0, -40.0, -45.0], 1.0)
    cmd, new = follower_step(follower(prev=None), scan, sonar_uniform(10.0),
                             PARAMS, AVOID)
    steer = (cmd.v_left - cmd.v_right) / 2.0
    assert steer == pytest.approx(PARAMS.kp * new.bearing_est, abs=1e-9)


def test_follower_step_critical_obstacle_steers_away():
    scan = make_scan_result([-0.2, 0.0, 0.2], [-50.0, -40.0, -45.0], 1.0)
    sonar = SonarScan(beams=((-0.5, 5.0), (0.0, 5.0), (0.5, 0.4)),
                      max_range=10.0, count=3)
    cmd, new = follower_step(follower(), scan, sonar, PARAMS, AVOID)
    assert new.situation is Situation.SITUATION1
    esc = escape_direction(sonar, AVOID.gamma_sonar)
    assert esc > 0.0
    assert new.bearing_est == pytest.approx(-esc, abs=1e-12)
    assert cmd.v_left < cmd.v_right  # turning away from the right-side mass


def test_follower_step_critical_keeps_antenna_on_raw_estimate():
    scan = make_scan_result([-0.2, 0.0, 0.2], [-50.0, -40.0, -45.0], 1.0)
    sonar = SonarScan(beams=((-0.5, 5.0), (0.0, 5.0), (0.5, 0.4)),
                      max_range=10.0, count=3)
    _, free_state = follower_step(follower(), scan, sonar_uniform(10.0),
                                  PARAMS, AVOID)
    _, crit_state = follower_step(follower(), scan, sonar, PARAMS, AVOID)
    assert crit_state.antenna_center == free_state.antenna_center


def test_follower_step_detected_obstacle_biases_heading():
    """A wall on the left of an otherwise centered source pushes both
    the steering command and the next scan window to the right."""
    scan = make_scan_result([-0.4, 0.0, 0.4], [-42.0, -40.0, -42.0], 1.0)
    beams = ((-0.4, 3.0), (0.0, 10.0), (0.4, 10.0))
    sonar = SonarScan(beams=beams, max_range=10.0, count=3)
    cmd, new = follower_step(follower(), scan, sonar, PARAMS, AVOID)
    assert new.situation is Situation.SITUATION2
    assert new.bearing_est > 0.0
    assert new.antenna_center == new.bearing_est
    assert cmd.v_left > cmd.v_right


def test_follower_step_records_scan_strength():
    scan = make_scan_result([-0.2, 0.0, 0.2], [-50.0, -40.0, -45.0], 1.0)
    _, new = follower_step(follower(), scan, sonar_uniform(10.0),
                           PARAMS, AVOID)
    assert new.rssi_leader == -40.0
    assert new.scan_prev_bearing == new.bearing_est


def test_control_params_validation():
    with pytest.raises(ValueError):
        ControlParams(kp=-1.0).validate()
    with pytest.raises(ValueError):
        ControlParams(omega1=0.0).validate()
    with pytest.raises(ValueError):
        ControlParams(omega2=-5.0).validate()
    with pytest.raises(ValueError):
        ControlParams(v_max=0.0).validate()
    ControlParams().validate()
