"""Discrete-event PBFT blockchain simulator with a digital-twin layer that
rebuilds the network from node state messages."""

from .config import ConfigError, SimConfig, small_net_config, large_net_config
from .metrics import RunMetrics, compare_runs, gini, run_metrics
from .model import Block, Chain, GaussianSpec, Link, NodeState, Transaction
from .monitor import Monitor, StateMessage
from .network import GossipNetwork, Topology, generate_topology
from .simulation import SimulationResult, simulate
from .twin import TwinModel, reconstruct_global_state

__version__ = "0.1.0"

__all__ = [
    "Block", "Chain", "ConfigError", "GaussianSpec", "GossipNetwork", "Link", "Monitor", "NodeState",
    "RunMetrics", "SimConfig", "SimulationResult", "StateMessage", "Topology", "Transaction", "TwinModel",
    "compare_runs", "small_net_config", "large_net_config", "generate_topology", "gini", "reconstruct_global_state",
    "run_metrics", "simulate",
]
