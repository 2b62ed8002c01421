"""Relay-chain link evaluation and end-to-end throughput.

The chain runs from the command-center end to the moving terminal.
Each adjacent pair carries a forward measurement (the tracking node's
directional antenna listening to the node it follows) and a backward
measurement (plain omni both sides). A link is usable while both
directions stay above the link floor; the chain rate is the weakest
link's rate shared across all hops.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .radio_propagation import (
    OMNI,
    AntennaPattern,
    PathLossModel,
    deterministic_rssi,
    sample_rssi,
)

if TYPE_CHECKING:
    from .sim_engine import RobotState, WorldModel

DEFAULT_RATE_MBPS = (6.0, 9.0, 12.0, 18.0, 24.0, 36.0, 48.0, 54.0)
DEFAULT_RATE_THRESHOLDS_DBM = tuple(float(t) for t in np.linspace(-90.0, -30.0, 8))


@dataclass(frozen=True)
class RateTable:
    """Step map from RSSI to link rate: highest rate whose threshold
    is at or below the RSSI, zero below the lowest threshold."""

    thresholds_dbm: tuple[float, ...] = DEFAULT_RATE_THRESHOLDS_DBM
    rates_mbps: tuple[float, ...] = DEFAULT_RATE_MBPS

    def validate(self) -> None:
        if len(self.thresholds_dbm) != len(self.rates_mbps):
            raise ValueError("rate table thresholds and rates differ in length")
        if len(self.thresholds_dbm) == 0:
            raise ValueError("rate table must be non-empty")
        if any(b <= a for a, b in zip(self.thresholds_dbm, self.thresholds_dbm[1:])):
            raise ValueError("rate table thresholds must be strictly ascending")
        if any(b < a for a, b in zip(self.rates_mbps, self.rates_mbps[1:])):
            raise ValueError("rate table rates must be non-decreasing")
        if any(r < 0 for r in self.rates_mbps):
            raise ValueError("rates must be >= 0")


DEFAULT_RATE_TABLE = RateTable()


@dataclass(frozen=True)
class RadioConfig:
    """Everything link evaluation and scan synthesis need about radio."""

    model: PathLossModel = PathLossModel()
    rx_pattern: AntennaPattern = AntennaPattern(kind="directional", gr_db=10.0)
    tx_pattern: AntennaPattern = OMNI
    doppler_enabled: bool = False
    link_floor_dbm: float = -67.0
    rate_table: RateTable = DEFAULT_RATE_TABLE


@dataclass(frozen=True)
class LinkState:
    rssi_forward: float
    rssi_backward: float

    @property
    def quality(self) -> float:
        return min(self.rssi_forward, self.rssi_backward)


@dataclass(frozen=True)
class ChainState:
    nodes: tuple[str, ...]
    links: tuple[LinkState, ...]
    connected: bool
    throughput_mbps: float


def link_rate(rssi: float, table: RateTable = DEFAULT_RATE_TABLE) -> float:
    """Rate in Mbps the given RSSI sustains on one link."""
    i = bisect.bisect_right(table.thresholds_dbm, rssi)
    if i == 0:
        return 0.0
    return table.rates_mbps[i - 1]


def end_to_end_throughput(chain: ChainState, hop_count: int,
                          table: RateTable = DEFAULT_RATE_TABLE) -> float:
    """Weakest-link rate divided by the hop count (shared half-duplex
    channel), zero when any link is down."""
    if hop_count < 1:
        raise ValueError(f"hop_count must be >= 1, got {hop_count}")
    if not chain.connected or not chain.links:
        return 0.0
    worst = min(link_rate(link.quality, table) for link in chain.links)
    return worst / hop_count


def evaluate_links(nodes: Sequence["RobotState"], radio: RadioConfig,
                   world: "WorldModel", rng: np.random.Generator) -> ChainState:
    """Measure every adjacent link and derive connectivity/throughput.

    The forward direction of link (i, i+1) is received at node i: a
    follower listens with its directional antenna aimed at
    heading + antenna_center, any other node with a plain omni. The
    backward direction is received omni at node i+1. Draw order is
    fixed (link by link, forward then backward) so a given rng stream
    reproduces the same chain exactly.
    """
    if len(nodes) < 2:
        raise ValueError("a chain needs at least two nodes")
    links = []
    for i in range(len(nodes) - 1):
        near, far = nodes[i], nodes[i + 1]
        if near.role == "follower":
            fwd_pattern = radio.rx_pattern
            fwd_boresight = near.pose.heading + near.antenna_center
        else:
            fwd_pattern = OMNI
            fwd_boresight = near.pose.heading
        fwd = deterministic_rssi(far.pose, near.pose, fwd_boresight,
                                 radio.tx_pattern, fwd_pattern,
                                 radio.model, world)
        bwd = deterministic_rssi(near.pose, far.pose, far.pose.heading,
                                 radio.tx_pattern, OMNI,
                                 radio.model, world)
        links.append(LinkState(
            rssi_forward=sample_rssi(fwd, radio.model, rng),
            rssi_backward=sample_rssi(bwd, radio.model, rng),
        ))
    links = tuple(links)
    connected = all(link.quality >= radio.link_floor_dbm for link in links)
    chain = ChainState(
        nodes=tuple(n.name for n in nodes),
        links=links,
        connected=connected,
        throughput_mbps=0.0,
    )
    throughput = end_to_end_throughput(chain, len(nodes) - 1, radio.rate_table)
    return ChainState(chain.nodes, links, connected, throughput)
