"""Directional-antenna sweeps and weighted-centroid bearing estimation.

A scan samples RSSI at 2N+1 evenly spaced angles across the sweep
window; the bearing estimate is the weighted centroid of the sample
angles with weights exponential in RSSI. The closed-form error
recursion over the cos^2 pattern and the tracking-feasibility
predicate live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels


@dataclass
class ScanConfig:
    """One antenna sweep's geometry and WCA gain.

    Samples sit at theta_cen + j*theta_int/(2*half_count) for
    j = -half_count..half_count; theta_int defaults to theta_interest
    so the samples span exactly [theta_cen - theta_interest/2,
    theta_cen + theta_interest/2]. scan_rate sets the sweep duration
    theta_interest/scan_rate.
    """

    theta_interest: float = math.pi
    theta_cen: float = 0.0
    half_count: int = 12
    theta_int: Optional[float] = None
    scan_rate: float = math.pi
    gamma: float = 10.0

    def __post_init__(self) -> None:
        if self.theta_int is None:
            self.theta_int = self.theta_interest

    def validate(self) -> None:
        if not 0.0 < self.theta_interest <= 2.0 * math.pi:
            raise ValueError(
                f"theta_interest must be in (0, 2*pi], got {self.theta_interest}")
        if self.half_count < 1:
            raise ValueError(f"half_count must be >= 1, got {self.half_count}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not self.scan_rate > 0:
            raise ValueError(f"scan_rate must be > 0, got {self.scan_rate}")

    @property
    def pitch(self) -> float:
        """Angular spacing between adjacent samples."""
        return self.theta_int / (2.0 * self.half_count)

    @property
    def duration(self) -> float:
        return self.theta_interest / self.scan_rate


@dataclass(frozen=True)
class ScanResult:
    """One completed sweep: ordered (angle, rssi) samples."""

    samples: tuple[tuple[float, float], ...]
    best_rssi: float
    duration: float

    def angles(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples], dtype=np.float64)

    def rssi(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples], dtype=np.float64)


@dataclass(frozen=True)
class BearingEstimate:
    theta_hat: float
    error: Optional[float] = None  # center minus true DOA, diagnostics only


def make_scan_result(angles: Sequence[float], rssi: Sequence[float],
                     duration: float) -> ScanResult:
    if len(angles) != len(rssi) or len(angles) == 0:
        raise ValueError("angles and rssi must be equal-length and non-empty")
    samples = tuple(zip((float(a) for a in angles), (float(r) for r in rssi)))
    return ScanResult(samples=samples, best_rssi=max(float(r) for r in rssi),
                      duration=duration)


def scan_angles(config: ScanConfig) -> list[float]:
    """Sample angles theta_cen + j*pitch for j = -N..N, ascending.

    Sweeps never wrap; angles are clipped at the body-frame servo
    limits +/- pi instead.
    """
    n = config.half_count
    pitch = config.pitch
    out = [config.theta_cen + j * pitch for j in range(-n, n + 1)]
    return [min(math.pi, max(-math.pi, a)) for a in out]


def wca_weight(rssi: float, gamma: float) -> float:
    """Centroid weight 10^(rssi/gamma)."""
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    return 10.0 ** (rssi / gamma)


def wca_bearing(scan: ScanResult, gamma: float) -> BearingEstimate:
    """Weighted-centroid bearing over the scan samples.

    The reduction normalizes by the strongest sample, which keeps weak
    samples from underflowing and makes the estimate exactly invariant
    to a uniform dB offset across the scan.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if len(scan.samples) == 0:
        raise ValueError("empty scan")
    theta = _kernels.wca_reduce(scan.angles(), scan.rssi(), gamma)
    return BearingEstimate(theta_hat=float(theta))


def update_center(prev_center: float, estimate: BearingEstimate) -> float:
    """Next sweep center: re-center on the latest estimate."""
    return estimate.theta_hat


def error_step(e: float, config: ScanConfig, gr_db: float) -> float:
    """Closed-form center-error correction f(e) for a noiseless sweep.

    Defined for |e| <= pi/2. f(0) = 0 exactly; on (-pi/2, pi/2) the
    correction opposes the error with |f(e)| < 2|e|, so the recursion
    e + f(e) contracts toward zero.
    """
    return float(_kernels.error_step_value(
        float(e), config.half_count, config.pitch, gr_db, config.gamma))


def tracking_feasible(v_relative: float, v_leader_perp: float,
                      scan_rate: float, d: float, theta_max: float) -> bool:
    """Whether DOA stays trackable at range d under the given motion.

    True when the radial speed alone is slow enough for the sweep to
    keep up, or when the perpendicular speed is covered by the sweep
    plus the radial allowance.
    """
    if d <= 0:
        raise ValueError(f"d must be > 0, got {d}")
    if theta_max <= 0:
        raise ValueError(f"theta_max must be > 0, got {theta_max}")
    if v_relative <= scan_rate * d / theta_max:
        return True
    return v_leader_perp <= scan_rate * d + theta_max * v_relative
