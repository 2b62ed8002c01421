import math

import numpy as np
import pytest

from relaysim.convoy_chain import (
    DEFAULT_RATE_TABLE,
    ChainState,
    LinkState,
    RadioConfig,
    RateTable,
    end_to_end_throughput,
    evaluate_links,
    link_rate,
)
from relaysim.radio_propagation import PathLossModel
from relaysim.sim_engine import Pose, RobotState, Segment, WorldModel


def node(name, x, y, role="leader", heading=0.0, center=0.0):
    return RobotState(name=name, pose=Pose(x, y, heading), role=role,
                      antenna_center=center)


def chain_of(links, connected=True):
    states = tuple(LinkState(r, r) for r in links)
    return ChainState(nodes=tuple(f"n{i}" for i in range(len(links) + 1)),
                      links=states, connected=connected, throughput_mbps=0.0)


def test_link_rate_below_table_floor():
    assert link_rate(-95.0) == 0.0


def test_link_rate_above_table_ceiling():
    assert link_rate(-25.0) == 54.0
    assert link_rate(-30.0) == 54.0


def test_link_rate_interior_lookup():
    # -60 dBm sits in the fourth band of the default 8-step table
    assert link_rate(-60.0) == 18.0
    assert link_rate(-90.0) == 6.0


def test_rate_table_validation():
    with pytest.raises(ValueError):
        RateTable(thresholds_dbm=(-90.0,), rates_mbps=(6.0, 9.0)).validate()
    with pytest.raises(ValueError):
        RateTable(thresholds_dbm=(), rates_mbps=()).validate()
    with pytest.raises(ValueError):
        RateTable(thresholds_dbm=(-30.0, -90.0),
                  rates_mbps=(6.0, 9.0)).validate()
    with pytest.raises(ValueError):
        RateTable(thresholds_dbm=(-90.0, -30.0),
                  rates_mbps=(9.0, 6.0)).validate()
    with pytest.raises(ValueError):
        RateTable(thresholds_dbm=(-90.0,), rates_mbps=(-1.0,)).validate()
    DEFAULT_RATE_TABLE.validate()


def test_throughput_single_strong_hop():
    assert end_to_end_throughput(chain_of([-30.0]), 1) == 54.0


def test_throughput_two_hop_half_duplex_split():
    assert end_to_end_throughput(chain_of([-30.0, -30.0]), 2) == 27.0


def test_throughput_disconnected_chain_is_zero():
    assert end_to_end_throughput(chain_of([-30.0], connected=False), 1) == 0.0


def test_throughput_never_exceeds_weakest_link():
    chain = chain_of([-30.0, -60.0, -35.0])
    got = end_to_end_throughput(chain, 3)
    assert got <= min(link_rate(l.quality) for l in chain.links)


def test_throughput_rejects_bad_hop_count():
    with pytest.raises(ValueError):
        end_to_end_throughput(chain_of([-30.0]), 0)


def test_evaluate_links_reference_distance():
    """One meter of separation leaves the reference power plus gains."""
    rng = np.random.default_rng(0)
    nodes = [node("f", 0.0, 0.0, role="follower"), node("l", 1.0, 0.0)]
    world = WorldModel(bounds=(-5, -5, 5, 5), obstacles=[])
    chain = evaluate_links(nodes, RadioConfig(), world, rng)
    assert chain.links[0].rssi_forward == pytest.approx(-5.0, abs=1e-12)
    assert chain.links[0].rssi_backward == pytest.approx(-15.0, abs=1e-12)
    assert chain.connected


def test_evaluate_links_directional_listener_aims_its_antenna():
    rng = np.random.default_rng(0)
    # antenna swung 90 degrees away: cos^2 kills the receive gain
    nodes = [node("f", 0.0, 0.0, role="follower", center=math.pi / 2),
             node("l", 1.0, 0.0)]
    world = WorldModel(bounds=(-5, -5, 5, 5), obstacles=[])
    chain = evaluate_links(nodes, RadioConfig(), world, rng)
    assert chain.links[0].rssi_forward == pytest.approx(-15.0, abs=1e-9)


def test_evaluate_links_wall_hits_both_links_of_middle_node():
    rng = np.random.default_rng(0)
    nodes = [node("a", 0.0, 0.0), node("b", 5.0, 3.0), node("c", 10.0, 0.0)]
    clear_world = WorldModel(bounds=(-5, -5, 15, 10), obstacles=[])
    wall_world = WorldModel(bounds=(-5, -5, 15, 10),
                            obstacles=[Segment(2.0, 1.5, 8.0, 1.5)])
    clear = evaluate_links(nodes, RadioConfig(), clear_world, rng)
    walled = evaluate_links(nodes, RadioConfig(), wall_world, rng)
    for i in range(2):
        assert walled.links[i].rssi_forward == pytest.approx(
            clear.links[i].rssi_forward - 10.0, abs=1e-12)
        assert walled.links[i].rssi_backward == pytest.approx(
            clear.links[i].rssi_backward - 10.0, abs=1e-12)


def test_evaluate_links_floor_disconnects_and_zeroes_throughput():
    rng = np.random.default_rng(0)
    model = PathLossModel(n=4.0)
    radio = RadioConfig(model=model)
    nodes = [node("a", 0.0, 0.0), node("b", 30.0, 0.0)]
    world = WorldModel(bounds=(-5, -5, 40, 5), obstacles=[])
    chain = evaluate_links(nodes, radio, world, rng)
    assert chain.links[0].quality < radio.link_floor_dbm
    assert not chain.connected
    assert chain.throughput_mbps == 0.0


def test_evaluate_links_noise_is_seed_deterministic():
    radio = RadioConfig(model=PathLossModel(shadow_sigma_db=2.0))
    nodes = [node("a", 0.0, 0.0), node("b", 5.0, 0.0), node("c", 10.0, 0.0)]
    world = WorldModel(bounds=(-5, -5, 15, 5), obstacles=[])
    one = evaluate_links(nodes, radio, world, np.random.default_rng(42))
    two = evaluate_links(nodes, radio, world, np.random.default_rng(42))
    assert one == two
    three = evaluate_links(nodes, radio, world, np.random.default_rng(43))
    assert three != one


def test_evaluate_links_needs_two_nodes():
    with pytest.raises(ValueError):
        evaluate_links([node("a", 0.0, 0.0)], RadioConfig(),
                       WorldModel(bounds=(-5, -5, 5, 5), obstacles=[]),
                       np.random.default_rng(0))


def test_extra_relay_halves_los_rate():
    rng = np.random.default_rng(0)
    world = WorldModel(bounds=(-5, -5, 15, 5), obstacles=[])
    direct = evaluate_links([node("a", 0.0, 0.0), node("c", 10.0, 0.0)],
                            RadioConfig(), world, rng)
    relayed = evaluate_links([node("a", 0.0, 0.0), node("b", 5.0, 0.0),
                              node("c", 10.0, 0.0)],
                             RadioConfig(), world, rng)
    assert relayed.throughput_mbps <= direct.throughput_mbps
    assert relayed.connected
