import math

import numpy as np
import pytest

from relaysim.antenna_scan_wca import ScanConfig
from relaysim.convoy_chain import RadioConfig
from relaysim.follower_control import ControlParams, Mode, WheelCommand
from relaysim.geometry import wrap_angle
from relaysim.obstacle_avoidance import AvoidanceParams
from relaysim.sim_engine import (
    NodeSetup,
    Pose,
    RobotState,
    Segment,
    Simulation,
    SonarGeometry,
    Waypoint,
    WorldModel,
    leader_script,
    raycast_sonar,
    rect_segments,
    step_kinematics,
)


def robot(x=0.0, y=0.0, heading=0.0, wheels=(0.0, 0.0)):
    return RobotState(name="r", pose=Pose(x, y, heading),
                      wheels=WheelCommand(*wheels))


def open_world(half=20.0):
    return WorldModel(bounds=(-half, -half, half, half), obstacles=[])


def two_node_sim(leader_x=8.0, leader_y=0.0, seed=1, waypoints=None,
                 speed=0.2, scan=None, control=None, world=None):
    nodes = [
        NodeSetup(state=RobotState(name="f", pose=Pose(0.0, 0.0, 0.0),
                                   role="follower")),
        NodeSetup(state=RobotState(name="l", pose=Pose(leader_x, leader_y, 0.0),
                                   role="leader"),
                  waypoints=waypoints or [], speed=speed),
    ]
    return Simulation(world=world or open_world(),
                      nodes=nodes,
                      radio=RadioConfig(),
                      scan_config=scan or ScanConfig(),
                      control=control or ControlParams(),
                      avoidance=AvoidanceParams(),
                      sonar=SonarGeometry(),
                      seed=seed)


def test_step_kinematics_straight_advance():
    out = step_kinematics(robot(wheels=(200.0, 200.0)), WheelCommand(200.0, 200.0),
                          1.0, 0.4)
    assert out.pose.x == pytest.approx(0.2, abs=1e-12)
    assert out.pose.y == 0.0
    assert out.pose.heading == 0.0


def test_step_kinematics_pure_rotation_holds_position():
    out = step_kinematics(robot(), WheelCommand(100.0, -100.0), 1.0, 0.4)
    assert out.pose.x == 0.0
    assert out.pose.y == 0.0
    assert out.pose.heading == pytest.approx(0.5, abs=1e-12)


def test_step_kinematics_quarter_circle_closed_form():
    # v = 0.2 m/s, omega = 0.25 rad/s, run until the heading gains pi/2
    duration = (math.pi / 2) / 0.25
    out = step_kinematics(robot(), WheelCommand(250.0, 150.0), duration, 0.4)
    assert out.pose.heading == pytest.approx(math.pi / 2, abs=1e-6)
    r = 0.2 / 0.25
    assert out.pose.x == pytest.approx(r, abs=1e-9)
    assert out.pose.y == pytest.approx(r, abs=1e-9)


def test_step_kinematics_argument_errors():
    with pytest.raises(ValueError):
        step_kinematics(robot(), WheelCommand(0.0, 0.0), 0.0, 0.4)
    with pytest.raises(ValueError):
        step_kinematics(robot(), WheelCommand(0.0, 0.0), 1.0, 0.0)


def test_step_kinematics_clips_at_wall_contact():
    world = WorldModel(bounds=(-5, -5, 5, 5),
                       obstacles=[Segment(1.0, -2.0, 1.0, 2.0)])
    out = step_kinematics(robot(wheels=(1000.0, 1000.0)),
                          WheelCommand(1000.0, 1000.0), 3.0, 0.4,
                          world=world, collision_radius=0.3)
    assert out.pose.x == pytest.approx(0.7, abs=5e-3)
    assert world.clearance(out.pose.x, out.pose.y) >= 0.3 - 1e-6


def test_step_kinematics_pinned_robot_still_turns():
    world = WorldModel(bounds=(-5, -5, 5, 5),
                       obstacles=[Segment(1.0, -2.0, 1.0, 2.0)])
    out = step_kinematics(robot(x=0.69), WheelCommand(800.0, 200.0), 1.0, 0.4,
                          world=world, collision_radius=0.3)
    # translation is pinned by the wall but the commanded turn lands
    assert out.pose.heading == pytest.approx((0.8 - 0.2) / 0.4, abs=1e-9)
    assert out.pose.x < 0.71


def test_step_kinematics_never_penetrates():
    world = WorldModel(bounds=(-5, -5, 5, 5),
                       obstacles=[Segment(1.0, -2.0, 1.0, 2.0),
                                  Segment(-1.5, -2.0, -1.5, 2.0)])
    rng = np.random.default_rng(9)
    state = robot()
    for _ in range(60):
        cmd = WheelCommand(float(rng.uniform(-900, 900)),
                           float(rng.uniform(-900, 900)))
        state = step_kinematics(state, cmd, 1.0, 0.4, world=world,
                                collision_radius=0.3)
        assert world.clearance(state.pose.x, state.pose.y) >= 0.28


def test_raycast_empty_world_reads_max_range():
    scan = raycast_sonar(Pose(0.0, 0.0, 0.0), open_world(), SonarGeometry())
    assert all(d == 10.0 for _, d in scan.beams)


def test_raycast_perpendicular_and_oblique_wall():
    world = WorldModel(bounds=(-5, -5, 5, 5),
                       obstacles=[Segment(2.0, -5.0, 2.0, 5.0)])
    geom = SonarGeometry(beam_count=9, fov_rad=math.pi)
    scan = raycast_sonar(Pose(0.0, 0.0, 0.0), world, geom)
    angle4, dist4 = scan.beams[4]
    assert angle4 == pytest.approx(0.0, abs=1e-12)
    assert dist4 == pytest.approx(2.0, abs=1e-12)
    angle6, dist6 = scan.beams[6]
    assert angle6 == pytest.approx(math.pi / 4, abs=1e-12)
    assert dist6 == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-9)
    assert scan.beams[0][1] == 10.0  # beam parallel to the wall plane


def test_raycast_rotates_with_the_body():
    world = WorldModel(bounds=(-5, -5, 5, 5),
                       obstacles=[Segment(2.0, -5.0, 2.0, 5.0)])
    geom = SonarGeometry(beam_count=9, fov_rad=math.pi)
    scan = raycast_sonar(Pose(0.0, 0.0, -math.pi / 4), world, geom)
    # wall straight ahead in the world now sits on the +45 degree body beam
    assert scan.beams[6][1] == pytest.approx(2.0, abs=1e-9)


def test_leader_script_stationary_single_waypoint():
    for t in (0.0, 5.0, 500.0):
        pose = leader_script(t, [Waypoint(3.0, 4.0)], 0.2)
        assert (pose.x, pose.y) == (3.0, 4.0)


def test_leader_script_constant_speed_leg():
    wps = [Waypoint(0.0, 0.0), Waypoint(10.0, 0.0)]
    assert leader_script(25.0, wps, 0.2).x == pytest.approx(5.0, abs=1e-12)
    arrived = leader_script(50.0, wps, 0.2)
    assert arrived.x == pytest.approx(10.0, abs=1e-12)
    assert leader_script(500.0, wps, 0.2).x == 10.0
    assert leader_script(25.0, wps, 0.2).heading == 0.0


def test_leader_script_dwell_holds_pose():
    wps = [Waypoint(0.0, 0.0, dwell_s=10.0), Waypoint(10.0, 0.0)]
    assert leader_script(9.9, wps, 0.2).x == 0.0
    assert leader_script(35.0, wps, 0.2).x == pytest.approx(5.0, abs=1e-12)


def test_leader_script_argument_errors():
    with pytest.raises(ValueError):
        leader_script(0.0, [], 0.2)
    with pytest.raises(ValueError):
        leader_script(0.0, [Waypoint(0, 0), Waypoint(1, 0)], 0.0)


def test_world_validate_catches_bad_geometry():
    with pytest.raises(ValueError):
        WorldModel(bounds=(5, 0, -5, 10), obstacles=[]).validate()
    with pytest.raises(ValueError):
        WorldModel(bounds=(-5, -5, 5, 5),
                   obstacles=[Segment(0, 0, 9, 0)]).validate()
    with pytest.raises(ValueError):
        WorldModel(bounds=(-5, -5, 5, 5),
                   obstacles=[Segment(0, 0, 1, 0, loss_db=-2.0)]).validate()


def test_world_clearance_tracks_walls_and_bounds():
    world = WorldModel(bounds=(0, 0, 10, 10),
                       obstacles=[Segment(5.0, 2.0, 5.0, 8.0)])
    assert world.clearance(1.0, 5.0) == 1.0
    assert world.clearance(4.0, 5.0) == 1.0
    assert world.clearance(4.0, 9.5) == 0.5


def test_rect_segments_outline():
    segs = rect_segments(1.0, 2.0, 3.0, 4.0, loss_db=7.0)
    assert len(segs) == 4
    xs = {s.x1 for s in segs} | {s.x2 for s in segs}
    ys = {s.y1 for s in segs} | {s.y2 for s in segs}
    assert xs == {1.0, 4.0}
    assert ys == {2.0, 6.0}
    assert all(s.loss_db == 7.0 for s in segs)


def test_sonar_geometry_validation():
    for bad in (SonarGeometry(beam_count=0),
                SonarGeometry(fov_rad=0.0),
                SonarGeometry(fov_rad=7.0),
                SonarGeometry(max_range_m=0.0)):
        with pytest.raises(ValueError):
            bad.validate()
    SonarGeometry().validate()


def test_tick_approaches_and_stops_at_rssi_standoff():
    """The follower halts where the best scan sample (path loss plus
    the aimed receive gain) crosses the stop threshold: at 10 m under
    the defaults."""
    sim = two_node_sim(leader_x=15.0)
    for _ in range(80):
        sim.tick()
    f, l = sim.nodes
    d = math.hypot(l.pose.x - f.pose.x, l.pose.y - f.pose.y)
    standoff = 10.0 ** ((-15.0 + 10.0 + 25.0) / 20.0)
    assert d <= standoff + 1e-6
    assert d > standoff - 0.3
    assert f.mode is Mode.STOP
    assert f.wheels == WheelCommand(0.0, 0.0)


def test_tick_static_scene_repeats_measurements():
    sim = two_node_sim(leader_x=12.0,
                       control=ControlParams(threshold_l=-60.0))
    # strong enough signal for the stop gate, so nothing ever moves
    sim.tick()
    first = (sim.nodes[0].bearing_est, sim.nodes[0].rssi_leader)
    sim.tick()
    second = (sim.nodes[0].bearing_est, sim.nodes[0].rssi_leader)
    # the antenna recenters on the estimate, so successive sweeps sample
    # at angles differing by ~1e-17 rad; measurements match to round-off
    assert second[0] == pytest.approx(first[0], abs=1e-12)
    assert second[1] == pytest.approx(first[1], abs=1e-9)
    assert sim.nodes[0].mode is Mode.STOP


def test_tick_preserves_world_frame_aim_across_body_rotation():
    sim = two_node_sim(leader_x=8.0, leader_y=8.0,
                       control=ControlParams(kp=400.0))
    h_pre = sim.nodes[0].pose.heading
    sim.tick()
    f = sim.nodes[0]
    assert f.pose.heading != h_pre  # the body really turned
    expected = wrap_angle(f.bearing_est + h_pre - f.pose.heading)
    assert f.antenna_center == pytest.approx(expected, abs=1e-12)


def test_tick_scripted_leader_follows_waypoints():
    sim = two_node_sim(leader_x=0.0, leader_y=5.0,
                       waypoints=[Waypoint(0.0, 5.0), Waypoint(2.0, 5.0)],
                       speed=0.2)
    sim.tick()
    assert sim.nodes[1].pose.x == pytest.approx(0.2, abs=1e-12)
    assert sim.nodes[1].vel_x == pytest.approx(0.2, abs=1e-12)
    for _ in range(12):
        sim.tick()
    assert sim.nodes[1].pose.x == pytest.approx(2.0, abs=1e-12)


def test_tick_true_bearing_uses_pre_motion_frame():
    sim = two_node_sim(leader_x=6.0, leader_y=0.0)
    sim.tick()
    f = sim.nodes[0]
    # leader dead ahead of the original pose
    assert f.true_bearing == pytest.approx(0.0, abs=1e-12)


def test_scan_window_respects_servo_limit():
    scan = ScanConfig(theta_interest=math.pi, half_count=12)
    sim = two_node_sim(leader_x=5.0, scan=scan)
    limit = math.pi - math.pi / 2
    for _ in range(20):
        sim.tick()
        assert abs(sim.nodes[0].antenna_center) <= limit + 1e-12
