"""Domain types shared by the simulator and the digital twin.

Units are fixed throughout the package: sizes in MB, bandwidth in MB/s and
time in seconds.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

DEFAULT_BANDWIDTH_FLOOR = 0.1


@dataclass(frozen=True)
class GaussianSpec:
    """A bandwidth distribution N(mean, std), truncated below at ``floor``."""

    mean: float
    std: float = 0.0
    floor: float = DEFAULT_BANDWIDTH_FLOOR

    def __post_init__(self):
        if not self.mean > 0:
            raise ValueError(f"bandwidth mean must be > 0, got {self.mean}")
        if self.std < 0:
            raise ValueError(f"bandwidth std must be >= 0, got {self.std}")
        if not self.floor > 0:
            raise ValueError(f"bandwidth floor must be > 0, got {self.floor}")

    def sample(self, rng, size=None):
        value = rng.normal(self.mean, self.std, size)
        return max(value, self.floor) if size is None else value.clip(min=self.floor)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, d: dict, floor: float = DEFAULT_BANDWIDTH_FLOOR) -> "GaussianSpec":
        return cls(float(d["mean"]), float(d["std"]), floor)


@dataclass(frozen=True)
class NodeState:
    id: int
    bandwidth: GaussianSpec
    peers: frozenset = frozenset()

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"node id must be non-negative, got {self.id}")
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "peers", frozenset(int(p) for p in self.peers))
        if self.id in self.peers:
            raise ValueError(f"node {self.id} lists itself as a peer")

    def to_dict(self) -> dict:
        return {"id": self.id, "bandwidth": self.bandwidth.to_dict(), "peers": sorted(self.peers)}

    @classmethod
    def from_dict(cls, d: dict) -> "NodeState":
        return cls(int(d["id"]), GaussianSpec.from_dict(d["bandwidth"]), frozenset(int(p) for p in d["peers"]))


@dataclass(frozen=True)
class Link:
    """Undirected link; endpoints are stored sorted so equal links compare equal."""

    a: int
    b: int
    latency: float = 0.0

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError(f"link endpoints must differ, got ({self.a}, {self.b})")
        if self.latency < 0:
            raise ValueError(f"link latency must be >= 0, got {self.latency}")
        a, b = sorted((int(self.a), int(self.b)))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def endpoints(self) -> tuple:
        return (self.a, self.b)

    def to_dict(self) -> dict:
        return {"endpoints": [self.a, self.b], "latency": self.latency}

    @classmethod
    def from_dict(cls, d: dict) -> "Link":
        a, b = d["endpoints"]
        return cls(int(a), int(b), float(d.get("latency", 0.0)))


@dataclass(frozen=True)
class Transaction:
    id: int
    arrival_time: float
    size: float
    # node the transaction enters the network at
    ingress: int = 0

    def __post_init__(self):
        if not self.size > 0:
            raise ValueError(f"transaction size must be > 0, got {self.size}")
        if self.arrival_time < 0:
            raise ValueError(f"arrival time must be >= 0, got {self.arrival_time}")

    def to_dict(self) -> dict:
        return {"id": self.id, "arrival_time": self.arrival_time, "size": self.size, "ingress": self.ingress}

    @classmethod
    def from_dict(cls, d: dict) -> "Transaction":
        return cls(int(d["id"]), float(d["arrival_time"]), float(d["size"]), int(d.get("ingress", 0)))


def block_digest(height: int, parent_id: Optional[str], proposer: Optional[int], tx_ids: Iterable[int]) -> str:
    """Content hash identifying a block; commit time is deliberately excluded."""
    payload = json.dumps([height, parent_id, proposer, list(tx_ids)], separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class BlockHeader:
    height: int
    block_id: str
    parent_id: Optional[str]
    proposer: Optional[int]
    commit_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "block_id": self.block_id,
            "parent_id": self.parent_id,
            "proposer": self.proposer,
            "commit_time": self.commit_time,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BlockHeader":
        return cls(int(d["height"]), d["block_id"], d.get("parent_id"), d.get("proposer"), float(d.get("commit_time", 0.0)))


@dataclass(frozen=True)
class BlockRef:
    """The (height, block_id) pair a state message carries to order updates."""

    height: int
    block_id: str

    def to_dict(self) -> dict:
        return {"height": self.height, "block_id": self.block_id}

    @classmethod
    def from_dict(cls, d: dict) -> "BlockRef":
        return cls(int(d["height"]), d["block_id"])

    @classmethod
    def of(cls, header: BlockHeader) -> "BlockRef":
        return cls(header.height, header.block_id)


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple = ()

    @property
    def size(self) -> float:
        return sum(tx.size for tx in self.transactions)

    @property
    def height(self) -> int:
        return self.header.height

    @property
    def block_id(self) -> str:
        return self.header.block_id

    def with_commit_time(self, t: float) -> "Block":
        h = self.header
        return Block(BlockHeader(h.height, h.block_id, h.parent_id, h.proposer, t), self.transactions)

    def to_dict(self) -> dict:
        d = self.header.to_dict()
        d["size"] = self.size
        d["transactions"] = [tx.to_dict() for tx in self.transactions]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Block":
        return cls(BlockHeader.from_dict(d), tuple(Transaction.from_dict(t) for t in d["transactions"]))


def genesis_block() -> Block:
    return Block(BlockHeader(0, block_digest(0, None, None, ()), None, None, 0.0))


def make_block(parent: BlockHeader, proposer: int, transactions: Sequence[Transaction]) -> Block:
    height = parent.height + 1
    digest = block_digest(height, parent.block_id, proposer, (tx.id for tx in transactions))
    return Block(BlockHeader(height, digest, parent.block_id, proposer), tuple(transactions))


@dataclass
class Chain:
    blocks: list = field(default_factory=list)

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    @property
    def head(self) -> Optional[Block]:
        return self.blocks[-1] if self.blocks else None

    def append(self, block: Block):
        self.blocks.append(block)

    def transactions(self) -> list:
        return [tx for b in self.blocks for tx in b.transactions]

    def to_dict(self) -> dict:
        return {"blocks": [b.to_dict() for b in self.blocks]}

    @classmethod
    def from_dict(cls, d: dict) -> "Chain":
        return cls([Block.from_dict(b) for b in d["blocks"]])


def validate_chain(chain: Chain, block_size: Optional[float] = None) -> bool:
    """True iff heights step by one, parents link up, commit times never
    decrease and no transaction appears twice."""
    seen = set()
    prev = None
    for block in chain:
        h = block.header
        if prev is None:
            if h.height == 0 and h.parent_id is not None:
                return False
        else:
            if h.height != prev.height + 1 or h.parent_id != prev.block_id:
                return False
            if h.commit_time < prev.commit_time:
                return False
        if block_size is not None and block.size > block_size + 1e-9:
            return False
        for tx in block.transactions:
            if tx.id in seen:
                return False
            seen.add(tx.id)
        prev = h
    return True
