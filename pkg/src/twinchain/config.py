"""Run configuration, loaded from JSON with every experiment parameter explicit."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional

from .model import GaussianSpec
from .workload import MODES


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    nodes: int
    peers_per_node: int
    num_tx: int
    tx_size: float
    block_size: float
    tps: float
    bandwidth_mean: float
    bandwidth_std: float
    seed: int
    consensus: str = "PBFT"
    latency: float = 0.0
    vote_size: float = 0.001
    # proposer waits at most this long for a full block before sending what it has
    block_interval: float = 1.0
    workload_mode: str = "uniform"
    bandwidth_floor: float = 0.1
    node_std_fraction: tuple = (0.05, 0.10)
    max_events: int = 20_000_000

    def __post_init__(self):
        object.__setattr__(self, "node_std_fraction", tuple(self.node_std_fraction))
        self.validate()

    @property
    def bandwidth(self) -> GaussianSpec:
        return GaussianSpec(self.bandwidth_mean, self.bandwidth_std, self.bandwidth_floor)

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.consensus.upper() == "PBFT", f"consensus: only 'PBFT' is supported, got {self.consensus!r}")
        need(isinstance(self.nodes, int) and self.nodes >= 2, f"nodes: must be an integer >= 2, got {self.nodes!r}")
        need(
            isinstance(self.peers_per_node, int) and 1 <= self.peers_per_node < self.nodes,
            f"peers_per_node: must satisfy 1 <= peers_per_node < nodes ({self.nodes}), got {self.peers_per_node!r}",
        )
        need(isinstance(self.num_tx, int) and self.num_tx >= 1, f"num_tx: must be an integer >= 1, got {self.num_tx!r}")
        need(self.tx_size > 0, f"tx_size: must be > 0 MB, got {self.tx_size!r}")
        need(self.block_size >= self.tx_size, f"block_size: must be >= tx_size ({self.tx_size}), got {self.block_size!r}")
        need(self.tps > 0, f"tps: must be > 0, got {self.tps!r}")
        need(self.bandwidth_mean > 0, f"bandwidth.mean: must be > 0 MB/s, got {self.bandwidth_mean!r}")
        need(self.bandwidth_std >= 0, f"bandwidth.std: must be >= 0, got {self.bandwidth_std!r}")
        need(isinstance(self.seed, int), f"seed: must be an integer, got {self.seed!r}")
        need(self.latency >= 0, f"latency: must be >= 0 s, got {self.latency!r}")
        need(self.vote_size > 0, f"vote_size: must be > 0 MB, got {self.vote_size!r}")
        need(self.block_interval > 0, f"block_interval: must be > 0 s, got {self.block_interval!r}")
        need(self.workload_mode in MODES, f"workload_mode: must be one of {MODES}, got {self.workload_mode!r}")
        need(self.bandwidth_floor > 0, f"bandwidth_floor: must be > 0, got {self.bandwidth_floor!r}")
        lo, hi = self.node_std_fraction
        need(0 <= lo <= hi, f"node_std_fraction: need 0 <= low <= high, got {self.node_std_fraction!r}")

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["bandwidth"] = {"mean": d.pop("bandwidth_mean"), "std": d.pop("bandwidth_std")}
        d["node_std_fraction"] = list(self.node_std_fraction)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict, seed: Optional[int] = None) -> "SimConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)} | {"bandwidth"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        bw = d.pop("bandwidth", None)
        if bw is not None:
            if not isinstance(bw, dict) or set(bw) - {"mean", "std"}:
                raise ConfigError(f"bandwidth: expected {{'mean': ..., 'std': ...}}, got {bw!r}")
            d.setdefault("bandwidth_mean", bw.get("mean"))
            d.setdefault("bandwidth_std", bw.get("std"))
        if seed is not None:
            d["seed"] = seed
        missing = [
            f.name
            for f in dataclasses.fields(cls)
            if f.default is dataclasses.MISSING and d.get(f.name) is None
        ]
        if missing:
            raise ConfigError(f"missing config fields: {', '.join(missing)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path, seed: Optional[int] = None) -> "SimConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), seed)


SMALL_NET = dict(
    consensus="PBFT", nodes=10, peers_per_node=5, num_tx=1000, tx_size=0.05,
    block_size=1.0, tps=100, bandwidth_mean=20.0, bandwidth_std=5.0,
)
LARGE_NET = dict(
    consensus="PBFT", nodes=50, peers_per_node=10, num_tx=1000, tx_size=0.05,
    block_size=1.0, tps=50, bandwidth_mean=20.0, bandwidth_std=5.0,
)


def small_net_config(seed: int = 1, **overrides) -> SimConfig:
    return SimConfig(**{**SMALL_NET, "seed": seed, **overrides})


def large_net_config(seed: int = 1, **overrides) -> SimConfig:
    return SimConfig(**{**LARGE_NET, "seed": seed, **overrides})
