"""Follower decision layer.

Turns one completed antenna scan plus the sonar picture into a
differential-drive wheel command, the drive/stop mode, and the next
antenna center. Pure functions over value inputs; the simulation
engine owns the state objects passed through follower_step.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import TYPE_CHECKING, Optional

from .antenna_scan_wca import ScanResult, update_center, wca_bearing
from .obstacle_avoidance import (
    AvoidanceParams,
    Situation,
    SonarScan,
    apply_penalty,
    classify_situation,
    escape_direction,
)

if TYPE_CHECKING:
    from .sim_engine import RobotState


class Mode(Enum):
    DRIVE = "drive"
    STOP = "stop"


@dataclass(frozen=True)
class ControlParams:
    """Wheel-control gains, speed law coefficients, and stop thresholds.

    kp/kd are mm/s per rad of bearing. omega1/omega2 map best-scan RSSI
    to a background speed in mm/s. threshold_l is the leader-side stop
    RSSI, threshold_b the rear-link minimum.
    """

    kp: float = 1.0
    kd: float = 0.3
    omega1: float = 10.0
    omega2: float = 150.0
    threshold_l: float = -25.0
    threshold_b: float = -40.0
    v_max: float = 400.0

    def validate(self) -> None:
        if self.kp < 0 or self.kd < 0:
            raise ValueError(f"kp and kd must be >= 0, got {self.kp}, {self.kd}")
        if not self.omega1 > 0 or not self.omega2 > 0:
            raise ValueError(
                f"omega1 and omega2 must be > 0, got {self.omega1}, {self.omega2}")
        if not self.v_max > 0:
            raise ValueError(f"v_max must be > 0, got {self.v_max}")


@dataclass(frozen=True)
class WheelCommand:
    v_left: float
    v_right: float


STOP_COMMAND = WheelCommand(0.0, 0.0)


def background_velocity(best_rssi: float, params: ControlParams) -> float:
    """Forward speed -omega1*RSSI - omega2, clamped to [0, v_max], mm/s.

    Stronger signal means the leader is closer and the follower slows;
    the clamp keeps the speed non-negative when the signal passes
    -omega2/omega1 dBm.
    """
    v = -params.omega1 * best_rssi - params.omega2
    return min(max(v, 0.0), params.v_max)


def wheel_velocities(theta_hat: float, theta_hat_prev: float, v: float,
                     params: ControlParams) -> WheelCommand:
    """PD steering around the background speed.

    The steering term is added to one wheel and subtracted from the
    other, so v_left + v_right is exactly 2*v; no clamp is applied
    here, preserving that identity.
    """
    steer = params.kp * theta_hat + params.kd * (theta_hat - theta_hat_prev)
    return WheelCommand(v + steer, v - steer)


def stop_decision(rssi_leader: float, rssi_behind: Optional[float],
                  params: ControlParams) -> Mode:
    """Drive only while the leader link is weak and the rear link strong.

    A follower with no rear neighbor (rssi_behind None) is constrained
    by the leader side alone.
    """
    leader_far = rssi_leader < params.threshold_l
    rear_ok = rssi_behind is None or rssi_behind > params.threshold_b
    if leader_far and rear_ok:
        return Mode.DRIVE
    return Mode.STOP


def follower_step(state: "RobotState", scan: ScanResult, sonar: SonarScan,
                  params: ControlParams, avoidance_params: AvoidanceParams,
                  gamma: float = 10.0) -> tuple[WheelCommand, "RobotState"]:
    """One scan-and-act cycle for a follower.

    Critical obstacle (Situation 1): steer away from the sonar
    centroid while the antenna keeps tracking the raw estimate.
    Detected obstacle (Situation 2): steer and re-center on the
    penalized estimate so the scan window drifts toward open space.
    Free: steer and re-center on the raw estimate. A Stop decision
    zeroes the wheels but the antenna center still updates.
    """
    situation = classify_situation(sonar, avoidance_params)
    raw = wca_bearing(scan, gamma)
    if situation is Situation.SITUATION1:
        steer = -escape_direction(sonar, avoidance_params.gamma_sonar)
        center_est = raw
    elif situation is Situation.SITUATION2:
        penalized = wca_bearing(apply_penalty(scan, sonar, avoidance_params), gamma)
        steer = penalized.theta_hat
        center_est = penalized
    else:
        steer = raw.theta_hat
        center_est = raw

    mode = stop_decision(scan.best_rssi, state.rssi_behind, params)
    if mode is Mode.DRIVE:
        v = background_velocity(scan.best_rssi, params)
        prev = state.scan_prev_bearing if state.scan_prev_bearing is not None else steer
        command = wheel_velocities(steer, prev, v, params)
    else:
        command = STOP_COMMAND

    new_state = replace(
        state,
        wheels=command,
        mode=mode,
        antenna_center=update_center(state.antenna_center, center_est),
        scan_prev_bearing=steer,
        situation=situation,
        bearing_est=steer,
        rssi_leader=scan.best_rssi,
    )
    return command, new_state
