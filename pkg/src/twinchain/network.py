"""Random peer topologies, the link delay model and gossip dissemination."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .model import DEFAULT_BANDWIDTH_FLOOR, GaussianSpec, Link, NodeState


@dataclass(frozen=True)
class Topology:
    nodes: tuple
    links: frozenset

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda s: s.id)))
        object.__setattr__(self, "links", frozenset(self.links))

    def __len__(self):
        return len(self.nodes)

    def node(self, node_id: int) -> NodeState:
        return self._by_id[node_id]

    @property
    def _by_id(self) -> dict:
        return {s.id: s for s in self.nodes}

    @property
    def ids(self) -> list:
        return [s.id for s in self.nodes]

    def degrees(self) -> list:
        return [len(s.peers) for s in self.nodes]

    def link_latency(self, a: int, b: int) -> float:
        for link in self.links:
            if link.endpoints == (min(a, b), max(a, b)):
                return link.latency
        raise KeyError((a, b))

    def validate(self) -> None:
        """Raise ValueError unless peer sets are symmetric, agree with the
        link set and every node has at least one peer."""
        by_id = self._by_id
        pairs = {link.endpoints for link in self.links}
        for s in self.nodes:
            if not s.peers:
                raise ValueError(f"node {s.id} has no peers")
            for p in s.peers:
                if p not in by_id:
                    raise ValueError(f"node {s.id} lists unknown peer {p}")
                if s.id not in by_id[p].peers:
                    raise ValueError(f"peer relation {s.id}->{p} is not symmetric")
                if (min(s.id, p), max(s.id, p)) not in pairs:
                    raise ValueError(f"peers {s.id},{p} have no link")
        for a, b in pairs:
            if a not in by_id or b not in by_id[a].peers:
                raise ValueError(f"link ({a},{b}) missing from peer sets")

    def components(self) -> list:
        """Connected components as sorted id lists, largest first."""
        by_id = self._by_id
        seen, comps = set(), []
        for s in self.nodes:
            if s.id in seen:
                continue
            comp, todo = [], deque([s.id])
            seen.add(s.id)
            while todo:
                u = todo.popleft()
                comp.append(u)
                for v in by_id[u].peers:
                    if v not in seen:
                        seen.add(v)
                        todo.append(v)
            comps.append(sorted(comp))
        comps.sort(key=lambda c: (-len(c), c[0]))
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) <= 1

    def subgraph(self, keep) -> "Topology":
        keep = set(keep)
        nodes = [NodeState(s.id, s.bandwidth, s.peers & keep) for s in self.nodes if s.id in keep]
        links = [l for l in self.links if l.a in keep and l.b in keep]
        return Topology(tuple(nodes), frozenset(links))

    def relabel(self) -> tuple:
        """Return a copy with dense ids 0..N-1 and the new->old id map."""
        old = self.ids
        new_of = {o: i for i, o in enumerate(old)}
        nodes = [NodeState(new_of[s.id], s.bandwidth, frozenset(new_of[p] for p in s.peers)) for s in self.nodes]
        links = [Link(new_of[l.a], new_of[l.b], l.latency) for l in self.links]
        return Topology(tuple(nodes), frozenset(links)), old

    def to_dict(self) -> dict:
        return {
            "nodes": [s.to_dict() for s in self.nodes],
            "links": [l.to_dict() for l in sorted(self.links, key=lambda l: l.endpoints)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict, floor: float = DEFAULT_BANDWIDTH_FLOOR) -> "Topology":
        nodes = []
        for nd in d["nodes"]:
            s = NodeState.from_dict(nd)
            nodes.append(NodeState(s.id, GaussianSpec(s.bandwidth.mean, s.bandwidth.std, floor), s.peers))
        return cls(tuple(nodes), frozenset(Link.from_dict(l) for l in d["links"]))

    @classmethod
    def from_json(cls, text: str, floor: float = DEFAULT_BANDWIDTH_FLOOR) -> "Topology":
        return cls.from_dict(json.loads(text), floor)

    @classmethod
    def from_edges(cls, bandwidths: dict, edges, latency: float = 0.0) -> "Topology":
        """Build from ``{id: GaussianSpec}`` and an iterable of id pairs."""
        peers = {i: set() for i in bandwidths}
        links = set()
        for a, b in edges:
            peers[a].add(b)
            peers[b].add(a)
            links.add(Link(a, b, latency))
        nodes = tuple(NodeState(i, bw, frozenset(peers[i])) for i, bw in bandwidths.items())
        return cls(nodes, frozenset(links))


def _capped_random_graph(n: int, k: int, rng: np.random.Generator) -> list:
    adj = [set() for _ in range(n)]
    for u in rng.permutation(n):
        need = k - len(adj[u])
        if need <= 0:
            continue
        cand = [v for v in range(n) if v != u and v not in adj[u] and len(adj[v]) < k]
        if not cand:
            continue
        picks = rng.choice(len(cand), size=min(need, len(cand)), replace=False)
        for i in picks:
            v = cand[int(i)]
            adj[u].add(v)
            adj[v].add(u)
    return adj


def _components(adj) -> list:
    seen, comps = set(), []
    for s in range(len(adj)):
        if s in seen:
            continue
        comp, todo = [], [s]
        seen.add(s)
        while todo:
            u = todo.pop()
            comp.append(u)
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        comps.append(sorted(comp))
    return comps


def generate_topology(
    n: int,
    k: int,
    bw: GaussianSpec,
    rng: np.random.Generator,
    bw_rng: Optional[np.random.Generator] = None,
    latency: float = 0.0,
    node_std_fraction: tuple = (0.05, 0.10),
    attempts: int = 200,
) -> Topology:
    """Random connected peer graph with every degree in ``[1, k]``.

    Each node's bandwidth is drawn once: its mean from ``bw`` (truncated at
    ``bw.floor``) and its own spread as a uniform fraction of that mean.
    Degree-capped random graphs are redrawn until connected; if that keeps
    failing (e.g. k=1 with n>2) components are joined through their
    lowest-degree nodes, which may push those nodes above ``k``.
    """
    if not 1 <= k < n:
        raise ValueError(f"peers per node must satisfy 1 <= k < n, got k={k}, n={n}")
    bw_rng = rng if bw_rng is None else bw_rng

    means = bw.sample(bw_rng, n)
    fractions = bw_rng.uniform(node_std_fraction[0], node_std_fraction[1], n)
    specs = [GaussianSpec(float(m), float(m * f), bw.floor) for m, f in zip(means, fractions)]

    for _ in range(attempts):
        adj = _capped_random_graph(n, k, rng)
        comps = _components(adj)
        if len(comps) == 1:
            break
    else:
        while len(comps) > 1:
            a = min(comps[0], key=lambda u: (len(adj[u]), u))
            b = min(comps[1], key=lambda u: (len(adj[u]), u))
            adj[a].add(b)
            adj[b].add(a)
            comps = _components(adj)

    edges = [(u, v) for u in range(n) for v in adj[u] if u < v]
    return Topology.from_edges({i: specs[i] for i in range(n)}, edges, latency)


def effective_bandwidth(sender: NodeState, receiver: NodeState, rng: np.random.Generator) -> float:
    """One hop's bandwidth: the slower of one sample from each endpoint."""
    if sender.id == receiver.id:
        raise ValueError("sender and receiver must differ")
    return min(sender.bandwidth.sample(rng), receiver.bandwidth.sample(rng))


def transmission_delay(size: float, latency: float, b_eff: float) -> float:
    if not b_eff > 0:
        raise ValueError(f"effective bandwidth must be > 0, got {b_eff}")
    return latency + size / b_eff


@dataclass(frozen=True)
class Hop:
    sender: int
    receiver: int
    send_time: float
    recv_time: float

    @property
    def delay(self) -> float:
        return self.recv_time - self.send_time


@dataclass(frozen=True)
class WireMessage:
    msg_id: str
    origin: int
    kind: str
    size: float
    hop: Optional[Hop] = None


@dataclass
class Flood:
    """Outcome of gossiping one message from ``origin``.

    ``arrival[v]`` is the first-receipt time at v relative to the send
    (``inf`` if unreachable). ``sent`` masks the directed edges actually
    used: every reached node forwards to all peers except the one it first
    heard from, so copies arriving after the first are duplicates.
    """

    origin: int
    size: float
    arrival: list
    parent: list
    sent: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    bandwidth: np.ndarray
    delay: np.ndarray

    def hops(self, t0: float = 0.0) -> Iterator[Hop]:
        for e in np.flatnonzero(self.sent):
            u, v = int(self.src[e]), int(self.dst[e])
            start = t0 + self.arrival[u]
            yield Hop(u, v, start, start + float(self.delay[e]))

    def deliveries(self) -> list:
        """(node, relative time) for every node reached, origin excluded."""
        return [(v, t) for v, t in enumerate(self.arrival) if v != self.origin and t != float("inf")]


class GossipNetwork:
    """Array form of a :class:`Topology` for flooding messages.

    Node ids must be dense (0..N-1). Per-hop bandwidth is resampled for every
    message from both endpoints' distributions and the minimum is used.
    """

    def __init__(self, topology: Topology):
        ids = topology.ids
        if ids != list(range(len(ids))):
            raise ValueError("gossip network needs dense node ids 0..N-1")
        n = len(ids)
        self.n = n
        self.means = np.array([s.bandwidth.mean for s in topology.nodes])
        self.stds = np.array([s.bandwidth.std for s in topology.nodes])
        self.floors = np.array([s.bandwidth.floor for s in topology.nodes])
        lat = {l.endpoints: l.latency for l in topology.links}
        src, dst, latency, indptr = [], [], [], [0]
        for s in topology.nodes:
            for p in sorted(s.peers):
                src.append(s.id)
                dst.append(p)
                latency.append(lat[(min(s.id, p), max(s.id, p))])
            indptr.append(len(dst))
        self.src = np.array(src, dtype=np.int64)
        self.dst = np.array(dst, dtype=np.int64)
        self.latency = np.array(latency, dtype=float)
        self._csr_indptr = np.array(indptr, dtype=np.int32)
        self._csr_dst = np.array(dst, dtype=np.int32)
        self._send_mean, self._send_std = self.means[self.src], self.stds[self.src]
        self._recv_mean, self._recv_std = self.means[self.dst], self.stds[self.dst]
        self._send_floor, self._recv_floor = self.floors[self.src], self.floors[self.dst]
        self._flat = self.src * n + self.dst

    def hop_bandwidths(self, rng: np.random.Generator) -> np.ndarray:
        # draws cover every ordered pair so a given (message, edge) sees the
        # same noise on any topology over the same node ids
        z = rng.standard_normal((2, self.n * self.n))
        send = self._send_mean + self._send_std * z[0, self._flat]
        recv = self._recv_mean + self._recv_std * z[1, self._flat]
        return np.minimum(np.maximum(send, self._send_floor), np.maximum(recv, self._recv_floor))

    def flood(self, origin: int, size: float, rng: np.random.Generator) -> Flood:
        # Not sending back to the parent never changes a first-receipt time,
        # so arrivals are plain shortest-path distances over this message's
        # hop delays.
        bandwidth = self.hop_bandwidths(rng)
        delay = self.latency + size / bandwidth
        graph = csr_matrix((delay, self._csr_dst, self._csr_indptr), shape=(self.n, self.n))
        dist, pred = dijkstra(graph, indices=origin, return_predecessors=True)
        pred[pred < 0] = -1
        reached = np.isfinite(dist)
        sent = reached[self.src] & (self.dst != pred[self.src])
        return Flood(origin, size, dist.tolist(), pred.tolist(), sent, self.src, self.dst, bandwidth, delay)


def gossip_broadcast(network: GossipNetwork, origin: int, msg: WireMessage, rng: np.random.Generator) -> Flood:
    """Flood ``msg`` from ``origin`` with first-receipt forwarding and
    duplicate suppression; see :class:`Flood` for the result."""
    if not 0 <= origin < network.n:
        raise ValueError(f"unknown origin {origin}")
    return network.flood(origin, msg.size, rng)
