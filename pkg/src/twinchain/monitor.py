"""Passive per-peer bandwidth estimation and the state messages sent to the twin.

A node never probes its peers. Each consensus message it receives yields one
sample ``size / delay`` for the sending peer, and the estimate of that peer is
the plain average of those samples.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import BlockHeader, BlockRef, GaussianSpec, NodeState
from .network import Flood, Hop

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BandwidthSample:
    peer: int
    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"bandwidth sample must be > 0, got {self.value}")


@dataclass(frozen=True)
class PeerEstimate:
    peer: int
    mean: float
    std: float
    samples: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "samples": self.samples}

    @classmethod
    def from_dict(cls, peer: int, d: dict) -> "PeerEstimate":
        return cls(int(peer), float(d["mean"]), float(d["std"]), int(d["samples"]))

    def as_gaussian(self, floor: float = 0.1) -> GaussianSpec:
        return GaussianSpec(max(self.mean, floor), self.std, floor)


def estimate_peer_bandwidth(samples: Sequence[BandwidthSample]) -> Optional[PeerEstimate]:
    """Average of the observed ``size / delay`` ratios for one peer, plus the
    sample standard deviation (0 for a single sample). None when empty."""
    if not samples:
        return None
    peers = {s.peer for s in samples}
    if len(peers) != 1:
        raise ValueError(f"samples mix several peers: {sorted(peers)}")
    values = np.array([s.value for s in samples])
    std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return PeerEstimate(samples[0].peer, float(values.mean()), std, len(values))


@dataclass(frozen=True)
class StateMessage:
    sender: int
    local_bandwidth: GaussianSpec
    peers: frozenset
    eps: dict
    block_ref: BlockRef
    emitted_at: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "peers", frozenset(self.peers))
        if self.sender in self.peers:
            raise ValueError(f"state message from {self.sender} lists its sender as a peer")

    @property
    def height(self) -> int:
        return self.block_ref.height

    def local_state(self) -> NodeState:
        return NodeState(self.sender, self.local_bandwidth, self.peers)

    def to_dict(self) -> dict:
        return {
            "sender": self.sender,
            "local_bandwidth": self.local_bandwidth.to_dict(),
            "peers": sorted(self.peers),
            "eps": {str(p): e.to_dict() for p, e in sorted(self.eps.items())},
            "block_ref": self.block_ref.to_dict(),
            "emitted_at": self.emitted_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StateMessage":
        return cls(
            sender=int(d["sender"]),
            local_bandwidth=GaussianSpec.from_dict(d["local_bandwidth"]),
            peers=frozenset(int(p) for p in d["peers"]),
            eps={int(p): PeerEstimate.from_dict(int(p), e) for p, e in d["eps"].items()},
            block_ref=BlockRef.from_dict(d["block_ref"]),
            emitted_at=float(d.get("emitted_at", 0.0)),
        )


def write_state_messages(messages: Iterable[StateMessage], path) -> None:
    with open(path, "w") as fh:
        for m in messages:
            fh.write(json.dumps(m.to_dict(), sort_keys=True) + "\n")


def read_state_messages(path) -> list:
    with open(path) as fh:
        return [StateMessage.from_dict(json.loads(line)) for line in fh if line.strip()]


class Monitor:
    """Running per-(receiver, sender) sample moments for every node.

    Moments are kept relative to the first sample of each pair so the
    variance of near-constant sample streams does not cancel badly.
    """

    def __init__(self, nodes: Sequence[NodeState]):
        self.nodes = {s.id: s for s in nodes}
        n = max(self.nodes) + 1 if self.nodes else 0
        self.n = n
        self.count = np.zeros(n * n, dtype=np.int64)
        self.shift = np.zeros(n * n)
        self.s1 = np.zeros(n * n)
        self.s2 = np.zeros(n * n)
        self.discarded = 0

    def _add(self, idx: np.ndarray, values: np.ndarray) -> None:
        # idx must not repeat within one call
        fresh = self.count[idx] == 0
        self.shift[idx[fresh]] = values[fresh]
        d = values - self.shift[idx]
        self.count[idx] += 1
        self.s1[idx] += d
        self.s2[idx] += d * d

    def observe(self, node: int, hop: Hop, size: float) -> Optional[BandwidthSample]:
        """Record one received message; returns the sample or None if the
        hop had zero delay."""
        if hop.receiver != node:
            raise ValueError(f"hop received by {hop.receiver}, not {node}")
        if hop.sender not in self.nodes[node].peers:
            raise ValueError(f"node {hop.sender} is not a peer of {node}")
        delay = hop.recv_time - hop.send_time
        if delay <= 0:
            if size > 0:
                self.discarded += 1
                log.warning("discarding zero-delay sample %d->%d of size %g", hop.sender, node, size)
            return None
        sample = BandwidthSample(hop.sender, size / delay)
        self._add(np.array([node * self.n + hop.sender]), np.array([sample.value]))
        return sample

    def observe_flood(self, flood: Flood) -> None:
        """Record every hop of a gossiped message at its receiver."""
        sent = flood.sent
        delay = flood.delay[sent]
        ok = delay > 0
        if not ok.all():
            self.discarded += int((~ok).sum())
        idx = (flood.dst[sent] * self.n + flood.src[sent])[ok]
        self._add(idx, flood.size / delay[ok])

    def estimate(self, node: int, peer: int) -> Optional[PeerEstimate]:
        i = node * self.n + peer
        c = int(self.count[i])
        if c == 0:
            return None
        mean = float(self.shift[i] + self.s1[i] / c)
        if c == 1:
            return PeerEstimate(peer, mean, 0.0, 1)
        var = (self.s2[i] - self.s1[i] ** 2 / c) / (c - 1)
        return PeerEstimate(peer, mean, math.sqrt(max(var, 0.0)), c)

    def eps(self, node: int) -> dict:
        out = {}
        for p in sorted(self.nodes[node].peers):
            est = self.estimate(node, p)
            if est is not None:
                out[p] = est
        return out

    def build_state_message(self, node: int, head: BlockHeader, now: float) -> StateMessage:
        s = self.nodes[node]
        return StateMessage(s.id, s.bandwidth, s.peers, self.eps(node), BlockRef.of(head), now)
