"""The digital twin's view of the network, rebuilt from node state messages.

Nodes that reported are mirrored exactly. A node whose report is missing is
rebuilt from what its peers said about it: its peers are the reporters that
list it, and its bandwidth is the highest estimate any of them holds. A
link's speed is the slower endpoint's, so every estimate of a node is capped
by its true bandwidth and the largest estimate is the closest one.

Reports arrive out of order. Each carries the sender's latest block, and the
twin only lets a report overwrite what it knows about a node when the report
refers to a later block than the one behind the current information.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import BlockRef, GaussianSpec, Link, NodeState
from .monitor import PeerEstimate, StateMessage
from .network import Topology


class Provenance(str, Enum):
    REPORTED = "Reported"
    RECONSTRUCTED = "Reconstructed"


@dataclass(frozen=True)
class TwinNodeEntry:
    state: NodeState
    provenance: Provenance
    block_ref: Optional[BlockRef]
    estimate: Optional[PeerEstimate] = None
    fallback: bool = False


@dataclass
class ReconstructionReport:
    received: int
    missing: int
    missing_nodes: list
    recovered_links: int
    lost_links: Optional[int] = None
    fallback_nodes: list = field(default_factory=list)
    lost: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "received": self.received,
            "missing": self.missing,
            "missing_nodes": sorted(self.missing_nodes),
            "recovered_links": self.recovered_links,
            "lost_links": self.lost_links,
            "lost": [list(p) for p in sorted(self.lost)],
            "fallback_nodes": sorted(self.fallback_nodes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


class NoStateMessages(ValueError):
    pass


def latest_per_sender(messages: Iterable[StateMessage]) -> dict:
    """Keep each sender's message with the highest block (first one wins a tie)."""
    best: dict = {}
    for m in messages:
        cur = best.get(m.sender)
        if cur is None or m.height > cur.height:
            best[m.sender] = m
    return best


def count_missing(messages: Iterable[StateMessage]) -> tuple:
    """``(unique_nodes, x)``: nodes seen as senders or listed peers, and how
    many of them sent nothing."""
    latest = latest_per_sender(messages)
    if not latest:
        raise NoStateMessages("no state messages")
    nodes = set(latest)
    for m in latest.values():
        nodes |= m.peers
    return len(nodes), len(nodes) - len(latest)


class TwinModel:
    """Incrementally updated reconstruction.

    Per node the model keeps (a) the node's own latest report and (b) the
    best third-party estimate, ranked by (block height, estimated mean). At
    an equal height a node's own report beats estimates, and estimates from
    different reporters are combined by taking the largest mean. Both
    rankings are maxima, so the result does not depend on arrival order.
    """

    def __init__(self, fallback_bandwidth: Optional[float] = None, latency: float = 0.0,
                 floor: float = 0.1):
        self.fallback_bandwidth = fallback_bandwidth
        self.latency = latency
        self.floor = floor
        self.reports: dict = {}
        self._estimates: dict = {}
        self._listed: set = set()
        self.applied = 0
        self.ignored = 0

    # -- updates -------------------------------------------------------------

    def apply(self, msg: StateMessage) -> bool:
        """Fold one state message in; returns False if nothing in the model
        changed.

        The sender's own report is replaced only by a later block. Its peer
        estimates always compete on rank, so a late-arriving older message
        ends up exactly where it would have been had it come first.
        """
        H = msg.height
        changed = False
        prev = self.reports.get(msg.sender)
        if prev is None or prev.height < H:
            self.reports[msg.sender] = msg
            changed = True
        if not msg.peers <= self._listed:
            self._listed |= msg.peers
            changed = True
        for peer, est in msg.eps.items():
            rank = (H, est.mean, est.std, msg.sender)
            cur = self._estimates.get(peer)
            if cur is None or rank > cur[0]:
                self._estimates[peer] = (rank, est, msg.block_ref)
                changed = True
        if changed:
            self.applied += 1
        else:
            self.ignored += 1
        return changed

    def apply_all(self, messages: Iterable[StateMessage]) -> "TwinModel":
        for m in messages:
            self.apply(m)
        return self

    # -- views -----------------------------------------------------------------

    def block_height(self, node: int) -> int:
        """Height of the latest update covering ``node`` (-1 if none)."""
        heights = [-1]
        if node in self.reports:
            heights.append(self.reports[node].height)
        if node in self._estimates:
            heights.append(self._estimates[node][0][0])
        return max(heights)

    @property
    def node_ids(self) -> list:
        return sorted(set(self.reports) | self._listed | set(self._estimates))

    def _reported_current(self, node: int) -> bool:
        if node not in self.reports:
            return False
        est = self._estimates.get(node)
        # at equal height a node's own report wins
        return est is None or est[0][0] <= self.reports[node].height

    def links(self) -> frozenset:
        out = set()
        for s, m in self.reports.items():
            for p in m.peers:
                out.add(Link(s, p, self.latency))
        return frozenset(out)

    def _fallback(self) -> float:
        if self.fallback_bandwidth is not None:
            return self.fallback_bandwidth
        means = [e.mean for m in self.reports.values() for e in m.eps.values()]
        # fsum is exactly rounded, so arrival order cannot change the last bit
        return math.fsum(means) / len(means) if means else 1.0

    @property
    def entries(self) -> dict:
        links = self.links()
        neighbours = {n: set() for n in self.node_ids}
        for l in links:
            neighbours[l.a].add(l.b)
            neighbours[l.b].add(l.a)
        out = {}
        for n in self.node_ids:
            peers = frozenset(neighbours[n])
            if self._reported_current(n):
                m = self.reports[n]
                out[n] = TwinNodeEntry(NodeState(n, m.local_bandwidth, peers), Provenance.REPORTED, m.block_ref)
            elif n in self._estimates:
                _, est, ref = self._estimates[n]
                bw = GaussianSpec(max(est.mean, self.floor), est.std, self.floor)
                out[n] = TwinNodeEntry(NodeState(n, bw, peers), Provenance.RECONSTRUCTED, ref, est)
            else:
                bw = GaussianSpec(max(self._fallback(), self.floor), 0.0, self.floor)
                out[n] = TwinNodeEntry(NodeState(n, bw, peers), Provenance.RECONSTRUCTED, None, None, True)
        return out

    def missing_nodes(self) -> list:
        return [n for n in self.node_ids if n not in self.reports]

    def unreconstructable(self, reference: Topology) -> set:
        """Links of ``reference`` whose endpoints both failed to report."""
        silent = set(reference.ids) - set(self.reports)
        return {l.endpoints for l in reference.links if l.a in silent and l.b in silent}

    def to_topology(self) -> Topology:
        return Topology(tuple(e.state for e in self.entries.values()), self.links())

    def report(self, reference: Optional[Topology] = None) -> ReconstructionReport:
        entries = self.entries
        missing = self.missing_nodes()
        missing_set = set(missing)
        recovered = sum(1 for l in self.links() if l.a in missing_set or l.b in missing_set)
        lost = sorted(self.unreconstructable(reference)) if reference is not None else []
        return ReconstructionReport(
            received=len(self.reports),
            missing=len(missing),
            missing_nodes=missing,
            recovered_links=recovered,
            lost_links=len(lost) if reference is not None else None,
            fallback_nodes=[n for n, e in entries.items() if e.fallback],
            lost=lost,
        )


def apply_state_message(model: TwinModel, msg: StateMessage) -> TwinModel:
    model.apply(msg)
    return model


def reconstruct_global_state(messages: Iterable[StateMessage], reference: Optional[Topology] = None,
                             **model_kw) -> tuple:
    """Build a :class:`TwinModel` from ``messages`` (any order, any number
    per sender) and its :class:`ReconstructionReport`."""
    messages = list(messages)
    if not messages:
        raise NoStateMessages("cannot reconstruct from zero state messages")
    model = TwinModel(**model_kw).apply_all(messages)
    return model, model.report(reference)


def asynchronous_delivery(messages: Sequence[StateMessage], drop: Iterable[int] = (),
                          reorder=None) -> list:
    """Drop every message of the ``drop`` senders and permute the rest.

    ``reorder`` is either an index permutation of the surviving messages or a
    numpy Generator used to draw one; None keeps the input order.
    """
    drop = set(drop)
    senders = {m.sender for m in messages}
    unknown = drop - senders
    if unknown:
        raise ValueError(f"cannot drop unknown senders {sorted(unknown)}")
    kept = [m for m in messages if m.sender not in drop]
    if not kept:
        raise NoStateMessages("every state message was dropped; nothing to reconstruct from")
    if reorder is None:
        return kept
    if isinstance(reorder, np.random.Generator):
        order = reorder.permutation(len(kept))
    else:
        order = list(reorder)
        if sorted(order) != list(range(len(kept))):
            raise ValueError("reorder is not a permutation of the delivered messages")
    return [kept[i] for i in order]


def to_dot(model: TwinModel, reference: Optional[Topology] = None) -> str:
    """Graphviz rendering: silent nodes red, links to them blue, links lost
    between two silent nodes red and dashed."""
    entries = model.entries
    missing = set(model.missing_nodes())
    lines = ["graph twin {", "  node [shape=circle, fontsize=10];"]
    for n, e in entries.items():
        bw = e.state.bandwidth
        color = "red" if n in missing else "black"
        lines.append(f'  {n} [label="{n}\\nμ:{bw.mean:.1f} σ:{bw.std:.2f}", color={color}];')
    for l in sorted(model.links(), key=lambda l: l.endpoints):
        color = "blue" if (l.a in missing or l.b in missing) else "black"
        bw = min(entries[l.a].state.bandwidth.mean, entries[l.b].state.bandwidth.mean)
        lines.append(f'  {l.a} -- {l.b} [color={color}, label="{bw:.1f}"];')
    if reference is not None:
        for a, b in sorted(model.unreconstructable(reference)):
            lines.append(f"  {a} -- {b} [color=red, style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"
