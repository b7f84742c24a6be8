"""Simplified three-phase PBFT rounds: pre-prepare, prepare, commit.

All nodes are honest block producers, so there is no view change and no
checkpointing. Proposers rotate round-robin by height.
"""

from __future__ import annotations

from collections import defaultdict
from enum import Enum
from typing import Iterable, Optional

from .model import Block, BlockHeader, Chain, Transaction, make_block

PRE_PREPARE = "PrePrepare"
PREPARE = "Prepare"
COMMIT = "Commit"

SIZE_EPS = 1e-9


class Phase(str, Enum):
    IDLE = "Idle"
    PRE_PREPARED = "PrePrepared"
    PREPARED = "Prepared"
    COMMITTED = "Committed"


def quorum_size(n: int) -> int:
    """2f + 1 with f = ceil((n - 1) / 3).

    Same as the textbook floor((n - 1) / 3) whenever 3 divides n - 1 (n = 4,
    7, 10, ...); otherwise one or two votes stricter, e.g. 35 of 50. Any two
    quorums still overlap. Capped at n so tiny clusters (n = 2) can commit.
    """
    if n < 1:
        raise ValueError(f"need at least one node, got {n}")
    return min(2 * -(-(n - 1) // 3) + 1, n)


def next_proposer(height: int, n: int) -> int:
    return height % n


def assemble_block(
    pool: Iterable[Transaction], bsize: float, parent: BlockHeader, proposer: int, now: float = 0.0
) -> Block:
    """Fill a block greedily in arrival order, stopping at the first
    transaction that would overflow ``bsize``."""
    pending = sorted(pool, key=lambda tx: (tx.arrival_time, tx.id))
    if not pending:
        raise ValueError("cannot assemble a block from an empty pool")
    chosen, used = [], 0.0
    for tx in pending:
        if used + tx.size > bsize + SIZE_EPS:
            break
        chosen.append(tx)
        used += tx.size
    return make_block(parent, proposer, chosen)


class PbftNode:
    """One replica's consensus state.

    Votes and proposals for future heights are buffered, votes for heights
    already committed are ignored. :meth:`handle` returns the phase messages
    this node must now broadcast, as ``(kind, height)`` pairs; blocks it
    committed meanwhile are appended to :attr:`newly_committed`.
    """

    def __init__(self, node_id: int, n: int, genesis: Block):
        self.id = node_id
        self.n = n
        self.quorum = quorum_size(n)
        self.chain = Chain([genesis])
        self.height = genesis.height
        self.pool: dict = {}
        self.pool_size = 0.0
        self.committed_ids: set = set()
        self.proposals: dict = {}
        self.prepare_votes = defaultdict(set)
        self.commit_votes = defaultdict(set)
        self.sent_prepare: set = set()
        self.sent_commit: set = set()
        self.newly_committed: list = []
        self.commit_times: dict = {}

    @property
    def head(self) -> BlockHeader:
        return self.chain.head.header

    def phase(self, height: int) -> Phase:
        if height <= self.height:
            return Phase.COMMITTED
        if height in self.sent_commit:
            return Phase.PREPARED
        if height in self.sent_prepare:
            return Phase.PRE_PREPARED
        return Phase.IDLE

    def is_proposer(self) -> bool:
        return next_proposer(self.height + 1, self.n) == self.id

    def add_transaction(self, tx: Transaction) -> bool:
        if tx.id in self.committed_ids or tx.id in self.pool:
            return False
        self.pool[tx.id] = tx
        self.pool_size += tx.size
        return True

    def pool_is_full(self, bsize: float) -> bool:
        return self.pool_size >= bsize - SIZE_EPS

    def propose(self, bsize: float, now: float) -> tuple:
        """Assemble the next block from the pool; returns ``(block, out)``."""
        block = assemble_block(self.pool.values(), bsize, self.head, self.id, now)
        for tx in block.transactions:
            self._drop_from_pool(tx.id)
        out = self.handle(PRE_PREPARE, block.height, self.id, block, now)
        return block, out

    def _drop_from_pool(self, tx_id: int) -> None:
        tx = self.pool.pop(tx_id, None)
        if tx is not None:
            self.pool_size -= tx.size
            if not self.pool:
                self.pool_size = 0.0

    def handle(self, kind: str, height: int, sender: int, block: Optional[Block] = None, now: float = 0.0) -> list:
        if height <= self.height:
            return []
        if kind == PRE_PREPARE:
            if block is None or block.height != height or block.header.proposer != next_proposer(height, self.n):
                return []
            self.proposals.setdefault(height, block)
        elif kind == PREPARE:
            self.prepare_votes[height].add(sender)
        elif kind == COMMIT:
            self.commit_votes[height].add(sender)
        else:
            raise ValueError(f"not a consensus message kind: {kind!r}")
        return self._progress(now)

    def _progress(self, now: float) -> list:
        out = []
        while True:
            h = self.height + 1
            block = self.proposals.get(h)
            if block is None:
                break
            if block.header.parent_id != self.head.block_id:
                # does not extend our head; no view change to recover
                del self.proposals[h]
                break
            if h not in self.sent_prepare:
                self.sent_prepare.add(h)
                self.prepare_votes[h].add(self.id)
                out.append((PREPARE, h))
            if h not in self.sent_commit and len(self.prepare_votes[h]) >= self.quorum:
                self.sent_commit.add(h)
                self.commit_votes[h].add(self.id)
                out.append((COMMIT, h))
            if h in self.sent_commit and len(self.commit_votes[h]) >= self.quorum:
                self._commit(block, now)
                continue
            break
        return out

    def _commit(self, block: Block, now: float) -> None:
        h = block.height
        self.chain.append(block.with_commit_time(now))
        self.height = h
        self.commit_times[h] = now
        for tx in block.transactions:
            self.committed_ids.add(tx.id)
            self._drop_from_pool(tx.id)
        for d in (self.proposals, self.prepare_votes, self.commit_votes):
            d.pop(h, None)
        self.sent_prepare.discard(h)
        self.sent_commit.discard(h)
        self.newly_committed.append(block)
