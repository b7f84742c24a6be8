"""Transaction arrival generation and its JSONL replay format."""

from __future__ import annotations

import json
from typing import Iterable

import numpy as np

from .model import Transaction

MODES = ("uniform", "poisson")


def generate_workload(
    total: int,
    tps: float,
    tx_size: float,
    mode: str = "uniform",
    rng: np.random.Generator = None,
    nodes: int = 1,
) -> list:
    """``total`` equally sized transactions at rate ``tps``.

    Uniform mode places arrival i at exactly ``i / tps``; poisson mode uses
    exponential gaps with mean ``1 / tps`` starting from t=0. Each
    transaction enters the network at a uniformly random node.
    """
    if total < 1:
        raise ValueError(f"total must be >= 1, got {total}")
    if not tps > 0:
        raise ValueError(f"tps must be > 0, got {tps}")
    if not tx_size > 0:
        raise ValueError(f"tx_size must be > 0, got {tx_size}")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if rng is None:
        rng = np.random.default_rng(0)

    if mode == "uniform":
        times = np.arange(total) / tps
    else:
        gaps = rng.exponential(1.0 / tps, total)
        gaps[0] = 0.0
        times = np.cumsum(gaps)
    ingress = rng.integers(0, nodes, total)
    return [Transaction(i, float(t), tx_size, int(g)) for i, (t, g) in enumerate(zip(times, ingress))]


def write_workload(workload: Iterable[Transaction], path) -> None:
    with open(path, "w") as fh:
        for tx in workload:
            fh.write(json.dumps(tx.to_dict(), sort_keys=True) + "\n")


def read_workload(path) -> list:
    with open(path) as fh:
        return [Transaction.from_dict(json.loads(line)) for line in fh if line.strip()]
