import heapq

import numpy as np
import pytest

from twinchain.model import GaussianSpec, NodeState
from twinchain.network import (
    GossipNetwork, Topology, effective_bandwidth, generate_topology, gossip_broadcast, transmission_delay,
)

from conftest import make_topology, node


def test_transmission_delay_oracle():
    assert transmission_delay(0.05, 0.01, 10.0) == pytest.approx(0.015)
    assert transmission_delay(1.0, 0.0, 20.0) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        transmission_delay(1.0, 0.0, 0.0)


def test_effective_bandwidth_degenerate_is_min():
    rng = np.random.default_rng(0)
    assert effective_bandwidth(node(0, 12.0), node(1, 7.5), rng) == 7.5


def test_effective_bandwidth_expectation_monte_carlo():
    # E[min(X, Y)] for independent normals, closed form (Clark 1961)
    from math import erf, exp, pi, sqrt

    m1, s1, m2, s2 = 20.0, 2.0, 21.0, 1.5
    th = sqrt(s1 ** 2 + s2 ** 2)
    a = (m1 - m2) / th
    Phi = lambda x: 0.5 * (1 + erf(x / sqrt(2)))
    phi = lambda x: exp(-x * x / 2) / sqrt(2 * pi)
    expected = m1 * Phi(-a) + m2 * Phi(a) - th * phi(a)
    rng = np.random.default_rng(5)
    a_node, b_node = node(0, m1, std=s1), node(1, m2, std=s2)
    draws = [effective_bandwidth(a_node, b_node, rng) for _ in range(20_000)]
    assert np.mean(draws) == pytest.approx(expected, abs=0.03)


def test_generate_topology_shape():
    topo = generate_topology(50, 10, GaussianSpec(20, 5), np.random.default_rng(1))
    topo.validate()
    assert topo.is_connected()
    deg = topo.degrees()
    assert max(deg) <= 10 and min(deg) >= 1
    for s in topo.nodes:
        assert 0.05 * s.bandwidth.mean <= s.bandwidth.std <= 0.10 * s.bandwidth.mean


def test_generate_topology_rejects_bad_degree():
    with pytest.raises(ValueError):
        generate_topology(5, 5, GaussianSpec(20, 5), np.random.default_rng(1))
    with pytest.raises(ValueError):
        generate_topology(5, 0, GaussianSpec(20, 5), np.random.default_rng(1))


def test_generate_topology_k1_is_still_connected():
    topo = generate_topology(8, 1, GaussianSpec(20, 5), np.random.default_rng(2))
    assert topo.is_connected()


def test_topology_json_round_trip_is_byte_identical():
    topo = generate_topology(10, 5, GaussianSpec(20, 5), np.random.default_rng(3))
    text = topo.to_json()
    assert Topology.from_json(text).to_json() == text


def test_topology_validate_catches_asymmetry():
    bad = Topology((node(0, peers={1}), node(1)), frozenset())
    with pytest.raises(ValueError):
        bad.validate()


def test_subgraph_and_relabel():
    topo = make_topology([1, 2, 3, 4, 5], [(0, 1), (1, 2), (3, 4)])
    comps = topo.components()
    assert [sorted(c) for c in comps] == [[0, 1, 2], [3, 4]]
    small = topo.subgraph(comps[1])
    relabelled, old = small.relabel()
    assert old == [3, 4] and relabelled.ids == [0, 1]
    assert relabelled.node(0).bandwidth.mean == 4


def _replay_gossip(net, origin, delay):
    """Event-by-event gossip over fixed per-edge delays: on first receipt a
    node forwards to every peer except the one it heard from."""
    n = net.n
    out = {}
    for e, (u, v) in enumerate(zip(net.src.tolist(), net.dst.tolist())):
        out.setdefault(u, []).append((v, e))
    first = [None] * n
    sends = []
    q = [(0.0, 0, origin, -1)]
    seq = 1
    while q:
        t, _, v, frm = heapq.heappop(q)
        if first[v] is not None:
            continue
        first[v] = t
        for w, e in out.get(v, []):
            if w == frm:
                continue
            sends.append(e)
            heapq.heappush(q, (t + delay[e], seq, w, v))
            seq += 1
    return first, sorted(sends)


def test_flood_matches_event_replay():
    topo = generate_topology(30, 6, GaussianSpec(20, 5), np.random.default_rng(9))
    net = GossipNetwork(topo)
    for origin in (0, 7, 29):
        fl = net.flood(origin, 1.0, np.random.default_rng(origin))
        first, sends = _replay_gossip(net, origin, fl.delay)
        assert np.allclose(fl.arrival, first, rtol=0, atol=1e-12)
        assert sorted(np.flatnonzero(fl.sent).tolist()) == sends


def test_triangle_gossip_trace():
    # node 2 is slow, so both its links run at 1 MB/s; 0-1 runs at 10 MB/s
    topo = make_topology([10.0, 10.0, 1.0], [(0, 1), (1, 2), (0, 2)])
    net = GossipNetwork(topo)
    fl = net.flood(0, 1.0, np.random.default_rng(0))
    assert fl.arrival[0] == 0.0
    assert fl.arrival[1] == pytest.approx(0.1)
    assert fl.arrival[2] == pytest.approx(1.0)  # direct beats 0.1 + 1.0 via node 1
    hops = sorted((h.sender, h.receiver, round(h.send_time, 9), round(h.recv_time, 9)) for h in fl.hops())
    # 0 sends to 1 and 2; 1 forwards to 2 only; 2 forwards to 1 only (heard from 0)
    assert hops == [(0, 1, 0.0, 0.1), (0, 2, 0.0, 1.0), (1, 2, 0.1, 1.1), (2, 1, 1.0, 2.0)]


def test_gossip_broadcast_delivers_everywhere_once():
    topo = generate_topology(12, 3, GaussianSpec(20, 5), np.random.default_rng(4))
    from twinchain.network import WireMessage

    fl = gossip_broadcast(GossipNetwork(topo), 5, WireMessage("m", 5, "Tx", 0.05), np.random.default_rng(0))
    got = [v for v, _ in fl.deliveries()]
    assert sorted(got) == [v for v in range(12) if v != 5]


def test_hop_noise_is_shared_across_topologies():
    a = make_topology([20, 20, 20, 20], [(0, 1), (1, 2), (2, 3)], stds=[2, 2, 2, 2])
    b = make_topology([20, 20, 20, 20], [(0, 1), (1, 3), (2, 3)], stds=[2, 2, 2, 2])
    bw_a = GossipNetwork(a).hop_bandwidths(np.random.default_rng(1))
    bw_b = GossipNetwork(b).hop_bandwidths(np.random.default_rng(1))
    na, nb = GossipNetwork(a), GossipNetwork(b)
    ea = dict(zip(zip(na.src.tolist(), na.dst.tolist()), bw_a))
    eb = dict(zip(zip(nb.src.tolist(), nb.dst.tolist()), bw_b))
    for e in set(ea) & set(eb):
        assert ea[e] == eb[e]
