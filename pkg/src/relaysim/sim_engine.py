"""World, kinematics, sonar, the scripted mover, and the tick loop.

One tick is one antenna sweep: every follower scans from a frozen pose,
decides, then integrates its wheel command for the sweep duration.
Nodes update in chain order from the command-center end outward, so a
follower's rear measurement always sees its rear neighbor's pose from
the current tick. All randomness flows through per-node streams spawned
from the scenario seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .antenna_scan_wca import ScanConfig, ScanResult, make_scan_result, scan_angles
from .convoy_chain import RadioConfig, evaluate_links
from .follower_control import ControlParams, Mode, WheelCommand, follower_step
from .geometry import bearing_to, wrap_angle
from .obstacle_avoidance import AvoidanceParams, Situation, SonarScan
from .radio_propagation import (
    OMNI,
    deterministic_rssi,
    doppler_loss_delta,
    sample_rssi,
)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float


@dataclass(frozen=True)
class Segment:
    """One attenuating wall segment; loss_db None inherits the model-wide
    per-wall default."""

    x1: float
    y1: float
    x2: float
    y2: float
    loss_db: Optional[float] = None


def rect_segments(x: float, y: float, w: float, h: float,
                  loss_db: Optional[float] = None) -> list[Segment]:
    """Axis-aligned rectangle outline as four wall segments."""
    return [
        Segment(x, y, x + w, y, loss_db),
        Segment(x + w, y, x + w, y + h, loss_db),
        Segment(x + w, y + h, x, y + h, loss_db),
        Segment(x, y + h, x, y, loss_db),
    ]


@dataclass
class WorldModel:
    """Rectangular arena with attenuating segment obstacles."""

    bounds: tuple[float, float, float, float] = (-50.0, -50.0, 50.0, 50.0)
    obstacles: list[Segment] = field(default_factory=list)
    annotations: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._arrays: Optional[tuple[np.ndarray, ...]] = None

    def validate(self) -> None:
        x0, y0, x1, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"bounds must be a nonempty rectangle, got {self.bounds}")
        for s in self.obstacles:
            for px, py in ((s.x1, s.y1), (s.x2, s.y2)):
                if not (x0 <= px <= x1 and y0 <= py <= y1):
                    raise ValueError(f"obstacle endpoint ({px}, {py}) outside bounds")
            if s.loss_db is not None and s.loss_db < 0:
                raise ValueError(f"obstacle attenuation must be >= 0, got {s.loss_db}")

    def segment_arrays(self) -> tuple[np.ndarray, ...]:
        """(ax, ay, bx, by, loss) arrays; loss is NaN where the segment
        defers to the model default."""
        if self._arrays is None:
            ax = np.array([s.x1 for s in self.obstacles], dtype=np.float64)
            ay = np.array([s.y1 for s in self.obstacles], dtype=np.float64)
            bx = np.array([s.x2 for s in self.obstacles], dtype=np.float64)
            by = np.array([s.y2 for s in self.obstacles], dtype=np.float64)
            loss = np.array(
                [math.nan if s.loss_db is None else s.loss_db
                 for s in self.obstacles], dtype=np.float64)
            self._arrays = (ax, ay, bx, by, loss)
        return self._arrays

    def clearance(self, x: float, y: float) -> float:
        """Distance from (x, y) to the nearest obstacle or boundary."""
        x0, y0, x1, y1 = self.bounds
        margin = min(x - x0, y - y0, x1 - x, y1 - y)
        if not self.obstacles:
            return margin
        ax, ay, bx, by, _ = self.segment_arrays()
        rx = bx - ax
        ry = by - ay
        seg_len2 = rx * rx + ry * ry
        t = ((x - ax) * rx + (y - ay) * ry) / np.where(seg_len2 > 0, seg_len2, 1.0)
        t = np.clip(t, 0.0, 1.0)
        dx = x - (ax + t * rx)
        dy = y - (ay + t * ry)
        return min(margin, float(np.sqrt(np.min(dx * dx + dy * dy))))


@dataclass(frozen=True)
class SonarGeometry:
    beam_count: int = 8
    fov_rad: float = math.pi
    max_range_m: float = 10.0

    def validate(self) -> None:
        if self.beam_count < 1:
            raise ValueError(f"beam_count must be >= 1, got {self.beam_count}")
        if not 0 < self.fov_rad <= 2 * math.pi:
            raise ValueError(f"fov_rad must be in (0, 2*pi], got {self.fov_rad}")
        if not self.max_range_m > 0:
            raise ValueError(f"max_range_m must be > 0, got {self.max_range_m}")

    def body_angles(self) -> np.ndarray:
        if self.beam_count == 1:
            return np.array([0.0])
        return np.linspace(-self.fov_rad / 2.0, self.fov_rad / 2.0,
                           self.beam_count)


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    dwell_s: float = 0.0


@dataclass
class RobotState:
    """Everything the engine tracks per node.

    antenna_center, bearings and headings are radians; wheel speeds
    mm/s; vel_x/vel_y the realized world-frame velocity in m/s from the
    last integration step. Fields after scan_prev_bearing are per-tick
    diagnostics and measurement caches.
    """

    name: str
    pose: Pose
    role: str = "follower"
    wheels: WheelCommand = WheelCommand(0.0, 0.0)
    antenna_center: float = 0.0
    mode: Mode = Mode.STOP
    scan_prev_bearing: Optional[float] = None
    rssi_leader: Optional[float] = None
    rssi_behind: Optional[float] = None
    situation: Optional[Situation] = None
    bearing_est: Optional[float] = None
    true_bearing: Optional[float] = None
    center_used: Optional[float] = None
    vel_x: float = 0.0
    vel_y: float = 0.0


def step_kinematics(state: RobotState, command: WheelCommand, dt: float,
                    axle_width: float, world: Optional[WorldModel] = None,
                    collision_radius: float = 0.3) -> RobotState:
    """Integrate the unicycle exactly for dt under a constant command.

    Linear speed is the wheel mean, angular speed (v_left - v_right) /
    axle_width; the sign convention turns the robot toward positive
    body-frame bearings. With a world given, translation is clipped at
    the first obstacle or boundary contact (bisected to the collision
    radius); heading still completes the tick's turn so a pinned robot
    can rotate away from the wall.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if axle_width <= 0:
        raise ValueError(f"axle_width must be > 0, got {axle_width}")
    v = 0.5 * (command.v_left + command.v_right) / 1000.0
    omega = (command.v_left - command.v_right) / 1000.0 / axle_width

    def advance(frac: float) -> Pose:
        h0 = state.pose.heading
        if abs(omega) < 1e-12:
            return Pose(state.pose.x + v * dt * frac * math.cos(h0),
                        state.pose.y + v * dt * frac * math.sin(h0),
                        wrap_angle(h0 + omega * dt * frac))
        r = v / omega
        h1 = h0 + omega * dt * frac
        return Pose(state.pose.x + r * (math.sin(h1) - math.sin(h0)),
                    state.pose.y - r * (math.cos(h1) - math.cos(h0)),
                    wrap_angle(h1))

    target = advance(1.0)
    if world is not None:
        # Walk the arc in sub-radius steps so thin segments cannot be
        # tunneled through, then bisect to the first contact.
        path_len = abs(v) * dt
        steps = min(128, max(1, math.ceil(path_len / (0.5 * collision_radius))))
        hit = None
        for k in range(1, steps + 1):
            p = advance(k / steps)
            if world.clearance(p.x, p.y) < collision_radius:
                hit = k
                break
        if hit is not None:
            lo, hi = (hit - 1) / steps, hit / steps  # lo stays feasible
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                p = advance(mid)
                if world.clearance(p.x, p.y) < collision_radius:
                    hi = mid
                else:
                    lo = mid
            # Translation stops at contact but the wheels keep slipping,
            # so the full turn still happens; otherwise a wall-pinned
            # robot could never rotate free again.
            blocked = advance(lo)
            target = Pose(blocked.x, blocked.y, advance(1.0).heading)
    return replace(state, pose=target)


def raycast_sonar(pose: Pose, world: WorldModel,
                  geometry: SonarGeometry) -> SonarScan:
    """Cast the sonar fan from the robot pose against world segments."""
    body = geometry.body_angles()
    ax, ay, bx, by, _ = world.segment_arrays()
    dists = _kernels.raycast_distances(pose.x, pose.y, pose.heading + body,
                                       ax, ay, bx, by, geometry.max_range_m)
    beams = tuple(zip((float(a) for a in body), (float(d) for d in dists)))
    return SonarScan(beams=beams, max_range=geometry.max_range_m,
                     count=geometry.beam_count)


def leader_script(t: float, waypoints: Sequence[Waypoint], speed: float,
                  initial_heading: float = 0.0) -> Pose:
    """Scripted pose at time t: piecewise-linear constant-speed legs
    through the waypoints with optional dwells at each."""
    if not waypoints:
        raise ValueError("waypoints must be non-empty")
    if len(waypoints) > 1 and speed <= 0:
        raise ValueError(f"speed must be > 0 to travel, got {speed}")
    x, y = waypoints[0].x, waypoints[0].y
    heading = initial_heading
    clock = 0.0
    # Initial dwell at the first waypoint, then alternate travel/dwell.
    if t < clock + waypoints[0].dwell_s:
        return Pose(x, y, heading)
    clock += waypoints[0].dwell_s
    for wp in waypoints[1:]:
        dist = math.hypot(wp.x - x, wp.y - y)
        if dist > 0:
            leg = dist / speed
            heading = math.atan2(wp.y - y, wp.x - x)
            if t < clock + leg:
                s = (t - clock) / leg
                return Pose(x + s * (wp.x - x), y + s * (wp.y - y), heading)
            clock += leg
        x, y = wp.x, wp.y
        if t < clock + wp.dwell_s:
            return Pose(x, y, heading)
        clock += wp.dwell_s
    return Pose(x, y, heading)


@dataclass
class NodeSetup:
    """Per-node scenario inputs the engine needs beyond RobotState."""

    state: RobotState
    waypoints: list[Waypoint] = field(default_factory=list)
    speed: float = 0.2
    control: Optional[ControlParams] = None


class Simulation:
    """Owns all per-run state and advances it one sweep at a time."""

    def __init__(self, world: WorldModel, nodes: list[NodeSetup],
                 radio: RadioConfig, scan_config: ScanConfig,
                 control: ControlParams, avoidance: AvoidanceParams,
                 sonar: SonarGeometry, seed: int,
                 axle_width: float = 0.4, collision_radius: float = 0.3,
                 intra_scan_leader_motion: bool = False):
        self.world = world
        self.nodes = [n.state for n in nodes]
        self.setups = nodes
        self.radio = radio
        self.scan_config = scan_config
        self.control = control
        self.avoidance = avoidance
        self.sonar = sonar
        self.axle_width = axle_width
        self.collision_radius = collision_radius
        self.intra_scan_leader_motion = intra_scan_leader_motion
        self.t = 0.0
        self.dt = scan_config.duration
        self.seed = seed
        # One child stream pair (scan, rear) per node plus one shared
        # stream for link evaluation; allocation covers every node so
        # stream identity never depends on roles.
        children = np.random.SeedSequence(seed).spawn(len(nodes) + 1)
        self._scan_rngs = []
        self._rear_rngs = []
        for ss in children[:-1]:
            a, b = ss.spawn(2)
            self._scan_rngs.append(np.random.default_rng(a))
            self._rear_rngs.append(np.random.default_rng(b))
        self._links_rng = np.random.default_rng(children[-1])
        self.chain = evaluate_links(self.nodes, radio, world, self._links_rng)

    def _control_for(self, index: int) -> ControlParams:
        override = self.setups[index].control
        return override if override is not None else self.control

    def _scripted_pose(self, index: int, t: float) -> Pose:
        setup = self.setups[index]
        if not setup.waypoints:
            return self.nodes[index].pose
        return leader_script(t, setup.waypoints, setup.speed,
                             initial_heading=self.nodes[index].pose.heading)

    def _scan_limit(self) -> float:
        return max(0.0, math.pi - self.scan_config.theta_interest / 2.0)

    def _synthesize_scan(self, index: int, target_index: int) -> ScanResult:
        """One sweep by follower `index` listening to its target.

        The follower pose is frozen for the whole sweep. The sample set
        shares a single deterministic omni-to-omni base (distance, walls,
        transmit gain) plus the per-angle directional gain; shadowing is
        drawn once per sweep, multipath per sample.
        """
        me = self.nodes[index]
        target = self.nodes[target_index]
        cfg = replace(self.scan_config, theta_cen=me.antenna_center)
        angles = np.array(scan_angles(cfg), dtype=np.float64)
        model = self.radio.model
        if self.intra_scan_leader_motion and self.setups[target_index].waypoints:
            # Robustness mode: the target keeps moving while the sweep runs.
            times = self.t + self.dt * (np.arange(angles.size) / max(angles.size - 1, 1))
            base = np.empty(angles.size)
            offs = np.empty(angles.size)
            for j, tj in enumerate(times):
                p = self._scripted_pose(target_index, float(tj))
                base[j] = deterministic_rssi(p, me.pose, me.pose.heading,
                                             self.radio.tx_pattern, OMNI,
                                             model, self.world)
                offs[j] = bearing_to(me.pose.x, me.pose.y, p.x, p.y) \
                    - me.pose.heading - angles[j]
            offsets = offs
        else:
            base = deterministic_rssi(target.pose, me.pose, me.pose.heading,
                                      self.radio.tx_pattern, OMNI,
                                      model, self.world)
            doa = bearing_to(me.pose.x, me.pose.y, target.pose.x, target.pose.y)
            offsets = doa - me.pose.heading - angles
        if self.radio.rx_pattern.kind == "directional":
            gains = _kernels.directional_gain_db(offsets, self.radio.rx_pattern.gr_db)
        else:
            gains = np.full(angles.size, self.radio.rx_pattern.gr_db)
        rssi = base + gains
        if self.radio.doppler_enabled:
            rssi = rssi - doppler_loss_delta(self._recession_rate(index, target_index))
        rng = self._scan_rngs[index]
        if model.shadow_sigma_db > 0.0:
            rssi = rssi + model.shadow_sigma_db * rng.standard_normal()
        if model.multipath_m is not None:
            g = rng.gamma(model.multipath_m, 1.0 / model.multipath_m, size=angles.size)
            rssi = rssi + 10.0 * np.log10(g)
        return make_scan_result(angles.tolist(), rssi.tolist(), cfg.duration)

    def _recession_rate(self, index: int, other_index: int) -> float:
        """Rate of separation (m/s, positive receding) between two nodes."""
        a = self.nodes[index]
        b = self.nodes[other_index]
        dx = b.pose.x - a.pose.x
        dy = b.pose.y - a.pose.y
        d = math.hypot(dx, dy)
        if d == 0:
            return 0.0
        rvx = b.vel_x - a.vel_x
        rvy = b.vel_y - a.vel_y
        return (dx * rvx + dy * rvy) / d

    def _measure_rear(self, index: int) -> Optional[float]:
        if index == 0:
            return None
        me = self.nodes[index]
        rear = self.nodes[index - 1]
        det = deterministic_rssi(rear.pose, me.pose, me.pose.heading,
                                 self.radio.tx_pattern, OMNI,
                                 self.radio.model, self.world)
        if self.radio.doppler_enabled:
            det -= doppler_loss_delta(self._recession_rate(index, index - 1))
        return sample_rssi(det, self.radio.model, self._rear_rngs[index])

    def tick(self) -> None:
        """Advance one sweep period: scripted motion, then every
        follower's scan-decide-move cycle in chain order, then links."""
        t_new = self.t + self.dt
        for i, setup in enumerate(self.setups):
            if self.nodes[i].role != "follower" and setup.waypoints:
                old = self.nodes[i].pose
                new = self._scripted_pose(i, t_new)
                self.nodes[i] = replace(
                    self.nodes[i], pose=new,
                    vel_x=(new.x - old.x) / self.dt,
                    vel_y=(new.y - old.y) / self.dt)
        for i in range(len(self.nodes)):
            me = self.nodes[i]
            if me.role != "follower":
                continue
            target_index = i + 1
            pre_pose = me.pose
            pre_center = me.antenna_center
            sonar = raycast_sonar(me.pose, self.world, self.sonar)
            scan = self._synthesize_scan(i, target_index)
            me = replace(me, rssi_behind=self._measure_rear(i))
            command, me = follower_step(me, scan, sonar, self._control_for(i),
                                        self.avoidance, gamma=self.scan_config.gamma)
            target = self.nodes[target_index]
            true_bearing = wrap_angle(
                bearing_to(pre_pose.x, pre_pose.y, target.pose.x, target.pose.y)
                - pre_pose.heading)
            me = replace(me, center_used=pre_center, true_bearing=true_bearing)
            moved = step_kinematics(me, command, self.dt, self.axle_width,
                                    self.world, self.collision_radius)
            # The estimate was measured in the pre-motion body frame;
            # re-express it in the post-motion frame so the aimed world
            # direction survives the body's own rotation, then respect
            # the servo's mechanical range.
            aimed = wrap_angle(
                moved.antenna_center + pre_pose.heading - moved.pose.heading)
            limit = self._scan_limit()
            aimed = min(max(aimed, -limit), limit)
            self.nodes[i] = replace(
                moved,
                antenna_center=aimed,
                vel_x=(moved.pose.x - pre_pose.x) / self.dt,
                vel_y=(moved.pose.y - pre_pose.y) / self.dt)
        self.chain = evaluate_links(self.nodes, self.radio, self.world,
                                    self._links_rng)
        self.t = t_new
