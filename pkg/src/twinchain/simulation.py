"""PBFT blockchain over a gossip network, driven by the event engine."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .config import SimConfig
from .engine import EventKind, Simulator, rng_stream
from .model import Block, Chain, genesis_block
from .monitor import Monitor
from .network import GossipNetwork, Topology, generate_topology
from .pbft import COMMIT, PRE_PREPARE, PREPARE, PbftNode, next_proposer
from .workload import generate_workload

TX = "Tx"
_KIND_CODE = {TX: 0, PRE_PREPARE: 1, PREPARE: 2, COMMIT: 3}


@dataclass
class SimulationResult:
    config: SimConfig
    topology: Topology
    workload: list
    chain: Chain
    node_chains: dict
    state_messages: list
    monitor: Monitor
    final_time: float
    events: int
    floods: int
    trace: Optional[list] = None

    def committed_tx_ids(self) -> list:
        return [tx.id for b in self.chain for tx in b.transactions]

    def chains_agree(self) -> bool:
        ref = [b.block_id for b in self.chain]
        return all([b.block_id for b in c] == ref for c in self.node_chains.values())


def build_topology(config: SimConfig) -> Topology:
    return generate_topology(
        config.nodes,
        config.peers_per_node,
        config.bandwidth,
        rng_stream(config.seed, "topology"),
        bw_rng=rng_stream(config.seed, "bandwidth"),
        latency=config.latency,
        node_std_fraction=config.node_std_fraction,
    )


def build_workload(config: SimConfig) -> list:
    return generate_workload(
        config.num_tx, config.tps, config.tx_size, config.workload_mode,
        rng_stream(config.seed, "workload"), nodes=config.nodes,
    )


class BlockchainSimulation:
    """One simulation instance.

    Transactions enter at their ingress node and are gossiped to every pool.
    The proposer of the next height sends its block once its pool holds a
    full block, or after ``block_interval`` with whatever it has. Each node
    emits one state message per block it commits.

    Per-hop noise for a message is drawn from a stream keyed by the message
    identity (kind, height or tx id, origin), so two runs on different
    topologies over the same node ids see the same noise for the same hop.
    """

    def __init__(self, topology: Topology, workload: list, config: SimConfig, trace: bool = False):
        topology.validate()
        self.topology = topology
        self.workload = sorted(workload, key=lambda tx: (tx.arrival_time, tx.id))
        self.config = config
        self.network = GossipNetwork(topology)
        self.n = self.network.n
        self.monitor = Monitor(topology.nodes)
        self.sim = Simulator(max_events=config.max_events, trace=[] if trace else None)
        genesis = genesis_block()
        self.nodes = [PbftNode(i, self.n, genesis) for i in range(self.n)]
        self.blocks: dict = {}
        self.proposer_commit: dict = {}
        self.state_messages: list = []
        self.waiting: dict = {}
        self.floods = 0
        self._tx = {tx.id: tx for tx in self.workload}
        for tx in self.workload:
            if not 0 <= tx.ingress < self.n:
                raise ValueError(f"transaction {tx.id} enters at unknown node {tx.ingress}")

        self.sim.on(EventKind.TX_ARRIVAL, self._on_tx_arrival)
        self.sim.on(EventKind.MSG_DELIVERY, self._on_delivery)
        self.sim.on(EventKind.ROUND_TIMEOUT, self._on_timeout)

    # -- dissemination -----------------------------------------------------

    def _broadcast(self, origin: int, kind: str, key: int, size: float) -> None:
        rng = rng_stream(self.config.seed, "hops", _KIND_CODE[kind], key, origin)
        flood = self.network.flood(origin, size, rng)
        self.floods += 1
        if kind != TX:
            self.monitor.observe_flood(flood)
        now = self.sim.now
        nodes = self.nodes
        for v, dt in flood.deliveries():
            # heights only grow, so a node past this height would drop it
            if kind != TX and nodes[v].height >= key:
                continue
            self.sim.schedule(now + dt, EventKind.MSG_DELIVERY, (v, kind, key, origin))

    # -- handlers ------------------------------------------------------------

    def _on_tx_arrival(self, ev) -> None:
        tx = self._tx[ev.payload]
        self._broadcast(tx.ingress, TX, tx.id, tx.size)
        self._receive_tx(tx.ingress, tx)

    def _receive_tx(self, v: int, tx) -> None:
        node = self.nodes[v]
        if node.add_transaction(tx) and v in self.waiting:
            if node.pool_is_full(self.config.block_size) or self.sim.now >= self.waiting[v]:
                self._propose(v)

    def _on_delivery(self, ev) -> None:
        v, kind, key, origin = ev.payload
        if kind == TX:
            self._receive_tx(v, self._tx[key])
            return
        block = self.blocks.get(key) if kind == PRE_PREPARE else None
        self._send(v, self.nodes[v].handle(kind, key, origin, block, self.sim.now))

    def _on_timeout(self, ev) -> None:
        v, height = ev.payload
        node = self.nodes[v]
        if v in self.waiting and node.height + 1 == height and node.pool:
            self._propose(v)

    # -- node actions ------------------------------------------------------

    def _send(self, v: int, out: list) -> None:
        size = self.config.vote_size
        for kind, h in out:
            self._broadcast(v, kind, h, size)
        self._after_commits(v)

    def _start_round(self, v: int) -> None:
        node = self.nodes[v]
        if node.pool_is_full(self.config.block_size):
            self._propose(v)
            return
        deadline = self.sim.now + self.config.block_interval
        self.waiting[v] = deadline
        self.sim.schedule(deadline, EventKind.ROUND_TIMEOUT, (v, node.height + 1))

    def _propose(self, v: int) -> None:
        self.waiting.pop(v, None)
        node = self.nodes[v]
        now = self.sim.now
        block, out = node.propose(self.config.block_size, now)
        self.blocks[block.height] = block
        self._broadcast(v, PRE_PREPARE, block.height, block.size)
        self._send(v, out)

    def _after_commits(self, v: int) -> None:
        node = self.nodes[v]
        if not node.newly_committed:
            return
        now = self.sim.now
        for block in node.newly_committed:
            h = block.height
            self.state_messages.append(self.monitor.build_state_message(v, node.chain.blocks[h].header, now))
            if block.header.proposer == v:
                self.proposer_commit[h] = now
        node.newly_committed.clear()
        if node.is_proposer():
            self._start_round(v)

    # -- driver --------------------------------------------------------------

    def run(self) -> SimulationResult:
        for tx in self.workload:
            self.sim.schedule(tx.arrival_time, EventKind.TX_ARRIVAL, tx.id)
        first = next_proposer(1, self.n)
        self._start_round(first)
        final = self.sim.run_until_quiescent()
        return SimulationResult(
            config=self.config,
            topology=self.topology,
            workload=self.workload,
            chain=self._global_chain(),
            node_chains={i: node.chain for i, node in enumerate(self.nodes)},
            state_messages=self.state_messages,
            monitor=self.monitor,
            final_time=final,
            events=self.sim.processed,
            floods=self.floods,
            trace=self.sim.trace,
        )

    def _global_chain(self) -> Chain:
        """Chain of the proposers' view: T(b) is the proposer's local commit
        time, held non-decreasing along the chain."""
        ref = max((node.chain for node in self.nodes), key=len)
        blocks, last = [ref.blocks[0]], 0.0
        for b in ref.blocks[1:]:
            t = max(self.proposer_commit.get(b.height, b.header.commit_time), last)
            blocks.append(b.with_commit_time(t))
            last = t
        return Chain(blocks)


def simulate(config: SimConfig, topology: Optional[Topology] = None, workload: Optional[list] = None,
             trace: bool = False) -> SimulationResult:
    topology = build_topology(config) if topology is None else topology
    workload = build_workload(config) if workload is None else workload
    return BlockchainSimulation(topology, workload, config, trace=trace).run()
