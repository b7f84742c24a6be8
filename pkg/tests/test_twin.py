import numpy as np
import pytest

from twinchain.model import BlockRef, GaussianSpec
from twinchain.monitor import PeerEstimate, StateMessage
from twinchain.twin import (
    NoStateMessages, Provenance, TwinModel, asynchronous_delivery, count_missing, latest_per_sender,
    reconstruct_global_state, to_dot,
)

from conftest import make_topology


def msg(sender, peers, eps, height=1, mean=20.0, std=1.0):
    eps = {p: PeerEstimate(p, m, s, 10) for p, (m, s) in eps.items()}
    return StateMessage(sender, GaussianSpec(mean, std), frozenset(peers), eps, BlockRef(height, f"b{height}"),
                        float(height))


# star-ish 4-node network: 3 is silent, 0/1/2 all peer with it
HAND = [
    msg(0, {1, 3}, {1: (15.0, 0.5), 3: (10.0, 0.4)}),
    msg(1, {0, 2, 3}, {0: (15.0, 0.5), 2: (14.0, 0.2), 3: (12.0, 0.3)}),
    msg(2, {1, 3}, {1: (14.0, 0.2), 3: (11.0, 0.1)}),
]


def test_missing_node_takes_highest_peer_estimate():
    model, report = reconstruct_global_state(HAND)
    e = model.entries[3]
    assert e.provenance is Provenance.RECONSTRUCTED
    assert e.state.bandwidth.mean == 12.0
    assert e.state.bandwidth.std == 0.3
    assert e.state.peers == frozenset({0, 1, 2})
    assert report.missing == 1 and report.missing_nodes == [3]
    assert report.recovered_links == 3


def test_reported_nodes_are_mirrored():
    model, _ = reconstruct_global_state(HAND)
    for m in HAND:
        e = model.entries[m.sender]
        assert e.provenance is Provenance.REPORTED
        assert e.state.bandwidth == m.local_bandwidth
        assert e.state.peers == m.peers


def test_count_missing_cases():
    assert count_missing(HAND) == (4, 1)
    assert count_missing(HAND[:1]) == (3, 2)
    assert count_missing([msg(0, {1}, {}), msg(1, {0}, {})]) == (2, 0)
    with pytest.raises(NoStateMessages):
        count_missing([])


def test_newer_block_wins_regardless_of_order():
    old = msg(0, {1}, {1: (9.0, 0.1)}, height=2, mean=20.0)
    new = msg(0, {1, 2}, {1: (11.0, 0.1)}, height=5, mean=21.0)
    for order in ([old, new], [new, old]):
        model = TwinModel().apply_all(order)
        assert model.entries[0].state.bandwidth.mean == 21.0
        assert model.block_height(0) == 5
    assert latest_per_sender([old, new])[0] is new


def test_later_estimate_overrides_older_own_report():
    # node 1 last reported at height 1; node 0 saw it later, at height 4
    own = msg(1, {0}, {0: (20.0, 0.1)}, height=1, mean=30.0)
    seen = msg(0, {1}, {1: (18.0, 0.2)}, height=4)
    model = TwinModel().apply_all([own, seen])
    e = model.entries[1]
    assert e.provenance is Provenance.RECONSTRUCTED
    assert e.state.bandwidth.mean == 18.0


def test_own_report_wins_a_tie():
    own = msg(1, {0}, {0: (20.0, 0.1)}, height=3, mean=30.0)
    seen = msg(0, {1}, {1: (18.0, 0.2)}, height=3)
    for order in ([own, seen], [seen, own]):
        e = TwinModel().apply_all(order).entries[1]
        assert e.provenance is Provenance.REPORTED and e.state.bandwidth.mean == 30.0


def test_stale_message_is_ignored():
    model = TwinModel()
    assert model.apply(msg(0, {1}, {1: (5.0, 0.1)}, height=3))
    assert not model.apply(msg(0, {1}, {1: (9.0, 0.1)}, height=2))
    assert model.ignored == 1
    assert model.entries[1].state.bandwidth.mean == 5.0
    assert model.reports[0].height == 3


def test_late_old_message_still_contributes_estimates():
    new = msg(0, {1}, {1: (5.0, 0.1)}, height=3)
    old = msg(0, {1, 2}, {1: (6.0, 0.1), 2: (7.0, 0.1)}, height=2)
    a = TwinModel().apply_all([new, old])
    b = TwinModel().apply_all([old, new])
    assert a.entries[2].state.bandwidth.mean == b.entries[2].state.bandwidth.mean == 7.0
    assert a.reports[0] is b.reports[0] is new


def test_node_with_no_estimate_uses_fallback():
    # 0 lists 2 but has no samples from it yet
    model, report = reconstruct_global_state([msg(0, {1, 2}, {1: (8.0, 0.1)}), msg(1, {0}, {0: (8.0, 0.1)})])
    e = model.entries[2]
    assert e.fallback and e.state.bandwidth.mean == 8.0
    assert report.fallback_nodes == [2]


def test_unreconstructable_links():
    ref = make_topology([10] * 5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)])
    msgs = [msg(s.id, s.peers, {}) for s in ref.nodes]
    adjacent = [m for m in msgs if m.sender not in (1, 2)]
    model, report = reconstruct_global_state(adjacent, ref)
    assert report.lost == [(1, 2)] and report.lost_links == 1
    assert (1, 2) not in {l.endpoints for l in model.links()}
    apart = [m for m in msgs if m.sender not in (1, 3)]
    _, report = reconstruct_global_state(apart, ref)
    assert report.lost_links == 0


def test_asynchronous_delivery():
    out = asynchronous_delivery(HAND, drop=[1], reorder=[1, 0])
    assert [m.sender for m in out] == [2, 0]
    perm = asynchronous_delivery(HAND, reorder=np.random.default_rng(0))
    assert sorted(m.sender for m in perm) == [0, 1, 2]
    with pytest.raises(ValueError):
        asynchronous_delivery(HAND, drop=[9])
    with pytest.raises(NoStateMessages):
        asynchronous_delivery(HAND, drop=[0, 1, 2])
    with pytest.raises(ValueError):
        asynchronous_delivery(HAND, reorder=[0, 0, 1])


def test_to_dot_marks_missing_and_lost():
    ref = make_topology([10] * 4, [(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)])
    msgs = [msg(s.id, s.peers, {p: (10.0, 0.0) for p in s.peers}) for s in ref.nodes if s.id not in (1, 3)]
    model, _ = reconstruct_global_state(msgs, ref)
    dot = to_dot(model, ref)
    assert dot.startswith("graph twin {")
    assert "1 [label" in dot and "color=red" in dot
    assert "1 -- 3 [color=red, style=dashed]" in dot
