import numpy as np
import pytest

from twinchain.model import (
    Block, BlockRef, Chain, GaussianSpec, Link, NodeState, Transaction, block_digest, genesis_block,
    make_block, validate_chain,
)


def txs(n, size=0.05, start=0):
    return [Transaction(start + i, i * 0.01, size) for i in range(n)]


def test_gaussian_spec_validation():
    with pytest.raises(ValueError):
        GaussianSpec(0.0)
    with pytest.raises(ValueError):
        GaussianSpec(1.0, -0.1)
    with pytest.raises(ValueError):
        GaussianSpec(1.0, 0.1, 0.0)


def test_gaussian_sample_is_floored():
    spec = GaussianSpec(0.2, 5.0, floor=0.1)
    x = spec.sample(np.random.default_rng(0), 10_000)
    assert x.min() == pytest.approx(0.1)
    assert spec.sample(np.random.default_rng(0)) >= 0.1
    assert GaussianSpec(7.0).sample(np.random.default_rng(1)) == 7.0


def test_node_state_rejects_self_peer():
    with pytest.raises(ValueError):
        NodeState(1, GaussianSpec(1.0), frozenset({1}))


def test_link_is_undirected():
    assert Link(3, 1) == Link(1, 3)
    assert Link(3, 1).endpoints == (1, 3)
    with pytest.raises(ValueError):
        Link(2, 2)


def test_block_digest_depends_on_contents():
    a = block_digest(1, "g", 0, [1, 2])
    assert a == block_digest(1, "g", 0, [1, 2])
    assert a != block_digest(1, "g", 0, [2, 1])
    assert a != block_digest(1, "g", 1, [1, 2])
    assert len(a) == 16


def test_chain_links_and_validation():
    chain = Chain([genesis_block()])
    b1 = make_block(chain.head.header, 1, txs(3)).with_commit_time(1.0)
    chain.append(b1)
    b2 = make_block(chain.head.header, 2, txs(2, start=3)).with_commit_time(2.0)
    chain.append(b2)
    assert validate_chain(chain, block_size=1.0)
    assert [tx.id for tx in chain.transactions()] == [0, 1, 2, 3, 4]
    assert BlockRef.of(b2.header) == BlockRef(2, b2.block_id)
    assert Chain.from_dict(chain.to_dict()).to_dict() == chain.to_dict()


def test_validate_chain_rejects_faults():
    g = genesis_block()
    b1 = make_block(g.header, 1, txs(2)).with_commit_time(2.0)
    dup = make_block(b1.header, 2, txs(1)).with_commit_time(3.0)
    assert not validate_chain(Chain([g, b1, dup]))
    early = make_block(b1.header, 2, txs(1, start=5)).with_commit_time(1.0)
    assert not validate_chain(Chain([g, b1, early]))
    big = make_block(g.header, 1, txs(30))
    assert not validate_chain(Chain([g, big]), block_size=1.0)
    orphan = make_block(genesis_block().header, 1, txs(1))
    assert not validate_chain(Chain([g, b1, orphan]))


def test_block_size():
    b = make_block(genesis_block().header, 1, txs(20))
    assert isinstance(b, Block)
    assert b.size == pytest.approx(1.0)
