"""Sonar-driven obstacle handling.

Classifies how close the nearest obstacle is, computes a
weighted-centroid escape direction when one is critically close, and
otherwise penalizes antenna-scan samples that point at detected
obstacles so the bearing estimate drifts toward open space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .antenna_scan_wca import ScanResult, make_scan_result


class Situation(Enum):
    FREE = "free"
    SITUATION2 = "situation2"
    SITUATION1 = "situation1"


@dataclass(frozen=True)
class SonarScan:
    """One sonar sweep: ordered (angle, distance) beams, body frame."""

    beams: tuple[tuple[float, float], ...]
    max_range: float
    count: int

    def validate(self) -> None:
        if len(self.beams) != self.count:
            raise ValueError("beam list length disagrees with count")
        angles = [b[0] for b in self.beams]
        if any(a2 <= a1 for a1, a2 in zip(angles, angles[1:])):
            raise ValueError("beams must be strictly ascending in angle")
        if any(not -math.pi <= a <= math.pi for a in angles):
            raise ValueError("beam angles must lie within the body frame +/- pi")
        if any(not 0.0 < d <= self.max_range for _, d in self.beams):
            raise ValueError("distances must lie in (0, max_range]")

    def min_distance(self) -> float:
        return min(d for _, d in self.beams)


@dataclass(frozen=True)
class AvoidanceParams:
    """Obstacle thresholds and penalty shape.

    threshold_o is in centimeters (detection range); d_crit in meters.
    alpha scales the penalty in dB, beta sets its decay per meter.
    """

    d_crit: float = 1.0
    threshold_o: float = 800.0
    alpha: float = 20.0
    beta: float = 0.5
    gamma_sonar: float = 10.0

    def validate(self) -> None:
        if not self.d_crit > 0:
            raise ValueError(f"d_crit must be > 0, got {self.d_crit}")
        if not self.threshold_o > self.d_crit * 100.0:
            raise ValueError(
                "threshold_o (cm) must exceed d_crit (m) converted to cm, "
                f"got {self.threshold_o} vs {self.d_crit * 100.0}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.gamma_sonar > 0:
            raise ValueError(f"gamma_sonar must be > 0, got {self.gamma_sonar}")

    @property
    def detection_range_m(self) -> float:
        return self.threshold_o / 100.0


def classify_situation(sonar: SonarScan, params: AvoidanceParams) -> Situation:
    """Three-way split on the nearest sonar return."""
    d = sonar.min_distance()
    if d < params.d_crit:
        return Situation.SITUATION1
    if d < params.detection_range_m:
        return Situation.SITUATION2
    return Situation.FREE


def escape_direction(sonar: SonarScan, gamma_sonar: float) -> float:
    """Weighted-centroid direction of the detected obstacles.

    Weights 10^(-distance/gamma) emphasize close returns, so the result
    points toward the obstacle mass; the caller steers away from it.
    """
    if len(sonar.beams) == 0:
        raise ValueError("empty sonar scan")
    if gamma_sonar <= 0:
        raise ValueError(f"gamma_sonar must be > 0, got {gamma_sonar}")
    angles = np.array([b[0] for b in sonar.beams], dtype=np.float64)
    dists = np.array([b[1] for b in sonar.beams], dtype=np.float64)
    return float(_kernels.sonar_reduce(angles, dists, gamma_sonar))


def pseudo_rssi(distance: float, alpha: float, beta: float) -> float:
    """Penalty magnitude alpha*exp(-beta*distance), in dB."""
    return alpha * math.exp(-beta * distance)


def apply_penalty(scan: ScanResult, sonar: SonarScan,
                  params: AvoidanceParams) -> ScanResult:
    """Subtract the obstacle penalty from scan samples facing returns.

    Each scan sample maps to the nearest sonar beam when it lies within
    half a beam pitch of one; if that beam's return is inside the
    detection range, the sample loses pseudo_rssi(distance) dB. Samples
    outside the sonar's angular coverage pass through unchanged.
    """
    sonar.validate()
    if params.alpha == 0.0:
        return scan
    beam_angles = [b[0] for b in sonar.beams]
    beam_dists = [b[1] for b in sonar.beams]
    if len(beam_angles) > 1:
        half_pitch = min(a2 - a1 for a1, a2 in
                         zip(beam_angles, beam_angles[1:])) / 2.0
    else:
        half_pitch = math.inf
    cutoff = params.detection_range_m
    out_angles = []
    out_rssi = []
    for theta, rssi in scan.samples:
        k = min(range(len(beam_angles)),
                key=lambda i: abs(beam_angles[i] - theta))
        if abs(beam_angles[k] - theta) <= half_pitch and beam_dists[k] < cutoff:
            rssi = rssi - pseudo_rssi(beam_dists[k], params.alpha, params.beta)
        out_angles.append(theta)
        out_rssi.append(rssi)
    return make_scan_result(out_angles, out_rssi, scan.duration)
