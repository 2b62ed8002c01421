"""Received-signal-strength model.

Deterministic log-distance path loss with directional receive gain and
per-wall attenuation, plus stochastic shadowing/multipath sampling and
the Doppler terms used by the tracking-feasibility analysis.

All powers are dBm, all gains dB, all angles radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from . import _kernels
from .geometry import wrap_angle

if TYPE_CHECKING:
    from .sim_engine import Pose, WorldModel

SPEED_OF_LIGHT = 2.998e8


@dataclass(frozen=True)
class PathLossModel:
    """Channel parameters for the log-distance RSSI model.

    Attributes
    ----------
    l0_dbm : reference received power at 1 m.
    n : path-loss decay exponent.
    shadow_sigma_db : std-dev of the zero-mean Gaussian shadowing term.
    multipath_m : Nakagami shape for the multipath term, None disables it.
    wall_loss_db : attenuation added per obstacle segment crossed.
    freq_hz : carrier frequency.
    c : propagation speed.
    """

    l0_dbm: float = -15.0
    n: float = 2.0
    shadow_sigma_db: float = 0.0
    multipath_m: Optional[float] = None
    wall_loss_db: float = 10.0
    freq_hz: float = 2.4e9
    c: float = SPEED_OF_LIGHT

    def validate(self) -> None:
        if not self.n > 0:
            raise ValueError(f"n must be > 0, got {self.n}")
        if self.shadow_sigma_db < 0:
            raise ValueError(
                f"shadow_sigma_db must be >= 0, got {self.shadow_sigma_db}")
        if self.multipath_m is not None and self.multipath_m < 0.5:
            raise ValueError(
                f"multipath_m must be >= 0.5 or None, got {self.multipath_m}")
        if self.wall_loss_db < 0:
            raise ValueError(
                f"wall_loss_db must be >= 0, got {self.wall_loss_db}")
        if not self.freq_hz > 0:
            raise ValueError(f"freq_hz must be > 0, got {self.freq_hz}")


@dataclass(frozen=True)
class AntennaPattern:
    """Antenna gain description.

    kind 'directional' applies a cos^2 receive pattern around boresight
    with zero contribution beyond +/- 90 deg (back lobe suppressed);
    kind 'omni' applies gr_db at every offset. gt_db is the flat
    transmit gain. beamwidth_deg is descriptive metadata only.
    """

    kind: str = "omni"
    gr_db: float = 0.0
    gt_db: float = 0.0
    beamwidth_deg: Optional[float] = None

    def validate(self) -> None:
        if self.kind not in ("omni", "directional"):
            raise ValueError(f"kind must be omni or directional, got {self.kind!r}")

    def pattern(self, phi: float) -> float:
        """Gain multiplier at boresight offset phi: cos^2 or flat 1."""
        if self.kind == "omni":
            return 1.0
        w = abs(wrap_angle(phi))
        if w > 0.5 * math.pi:
            return 0.0
        return math.cos(w) ** 2

    def gain_db(self, phi: float) -> float:
        return self.gr_db * self.pattern(phi)


OMNI = AntennaPattern()


def free_space_loss(d: float, model: PathLossModel) -> float:
    """Free-space loss 20*log10(4*pi*d*f/c) in dB at distance d meters."""
    if d <= 0:
        raise ValueError(f"distance must be > 0, got {d}")
    return 20.0 * math.log10(4.0 * math.pi * d * model.freq_hz / model.c)


def _wall_crossings_db(tx_x: float, tx_y: float, rx_x: float, rx_y: float,
                       model: PathLossModel, world) -> float:
    if world is None:
        return 0.0
    ax, ay, bx, by, loss = world.segment_arrays()
    if ax.size == 0:
        return 0.0
    if model.wall_loss_db == 0.0 and not np.any(loss):
        return 0.0
    # Per-segment loss: the segment's own attenuation when set, else the
    # model-wide default.
    eff = np.where(np.isnan(loss), model.wall_loss_db, loss)
    return _kernels.path_attenuation_db(tx_x, tx_y, rx_x, rx_y,
                                        ax, ay, bx, by, eff)


def _xy(p) -> "tuple[float, float]":
    """Accept either an (x, y) pair or any object with .x/.y fields."""
    try:
        return float(p.x), float(p.y)
    except AttributeError:
        return float(p[0]), float(p[1])


def deterministic_rssi(tx, rx, rx_boresight: float,
                       tx_pattern: AntennaPattern, rx_pattern: AntennaPattern,
                       model: PathLossModel, world=None) -> float:
    """Noise-free received power at rx from tx, in dBm.

    tx and rx are positions: (x, y) pairs or pose-like objects.
    rx_boresight is the world-frame direction of the receive antenna's
    peak-gain axis. Wall attenuation counts obstacle segments properly
    crossed by the tx-rx line.
    """
    tx_x, tx_y = _xy(tx)
    rx_x, rx_y = _xy(rx)
    dx = tx_x - rx_x
    dy = tx_y - rx_y
    d = math.hypot(dx, dy)
    if d == 0.0:
        raise ValueError("tx and rx positions coincide")
    phi = wrap_angle(math.atan2(dy, dx) - rx_boresight)
    p = model.l0_dbm - 10.0 * model.n * math.log10(d)
    p += rx_pattern.gain_db(phi) + tx_pattern.gt_db
    p -= _wall_crossings_db(tx_x, tx_y, rx_x, rx_y, model, world)
    return p


def sample_rssi(deterministic_dbm: float, model: PathLossModel,
                rng: np.random.Generator) -> float:
    """Add shadowing and multipath noise to a deterministic RSSI.

    Shadowing: zero-mean Gaussian, sigma = shadow_sigma_db. Multipath:
    20*log10(a) with amplitude a Nakagami(m, omega=1), i.e. a^2 drawn
    from Gamma(m, 1/m). Disabled terms draw nothing from rng, so noise
    configuration does not shift downstream streams.
    """
    out = deterministic_dbm
    if model.shadow_sigma_db > 0.0:
        out += model.shadow_sigma_db * rng.standard_normal()
    if model.multipath_m is not None:
        g = rng.gamma(model.multipath_m, 1.0 / model.multipath_m)
        out += 10.0 * math.log10(g)
    return out


def doppler_frequency(f: float, v_follower: float, v_leader: float,
                      c: float = SPEED_OF_LIGHT) -> float:
    """Observed frequency under relative radial motion.

    v_follower is the follower speed toward the leader, v_leader the
    leader speed away from the follower; the relative speed is their
    difference and shifts f by f*v_relative/c.
    """
    v_relative = v_leader - v_follower
    if abs(v_relative) >= c:
        raise ValueError("relative speed must be below propagation speed")
    return f * (1.0 + v_relative / c)


def doppler_loss_delta(v_relative: float, c: float = SPEED_OF_LIGHT) -> float:
    """Path-loss change 20*log10((c + v_relative)/c) in dB.

    Below 1e-6 dB for any |v_relative| <= 10 m/s, which is what makes
    the Doppler contribution negligible for bearing tracking.
    """
    if abs(v_relative) >= c:
        raise ValueError("relative speed must be below propagation speed")
    return 20.0 * math.log10((c + v_relative) / c)


def velocity_components(v: float, heading: float, theta_cen: float,
                        theta_cen_star: float) -> tuple[float, float]:
    """Split speed v into components parallel/perpendicular to the DOA.

    The split depends only on the boresight error theta_cen -
    theta_cen_star; heading is accepted so callers can pass body-frame
    angles without re-deriving them.
    """
    delta = wrap_angle(theta_cen - theta_cen_star)
    return v * math.cos(delta), v * math.sin(delta)
