"""Trilemma KPIs of a finished run and original-vs-reconstructed deltas."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import Chain, Transaction

CSV_FIELDS = ("run_id", "M", "seed", "throughput", "avg_latency", "gini", "backlog")


def _blocks(chain: Chain) -> list:
    return [b for b in chain if b.header.proposer is not None]


def throughput(chain: Chain, horizon: Optional[float] = None) -> float:
    """Committed transactions per second up to ``horizon`` (default: the
    last commit time)."""
    blocks = _blocks(chain)
    committed = sum(len(b.transactions) for b in blocks)
    if not blocks or committed == 0:
        return 0.0
    if horizon is None:
        horizon = blocks[-1].header.commit_time
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    return committed / horizon


def transaction_latencies(chain: Chain, workload: Sequence[Transaction]) -> dict:
    arrivals = {tx.id: tx.arrival_time for tx in workload}
    out = {}
    for b in _blocks(chain):
        for tx in b.transactions:
            if tx.id not in arrivals:
                raise KeyError(f"committed transaction {tx.id} is not in the workload")
            out[tx.id] = b.header.commit_time - arrivals[tx.id]
    return out


def avg_transaction_latency(chain: Chain, workload: Sequence[Transaction]) -> tuple:
    """``(mean latency, backlog)``; backlog counts uncommitted transactions
    and is kept out of the mean."""
    lat = transaction_latencies(chain, workload)
    backlog = len({tx.id for tx in workload} - set(lat))
    mean = float(np.mean(list(lat.values()))) if lat else 0.0
    return mean, backlog


def gini(values: Sequence[float]) -> float:
    """Population Gini: sum_ij |x_i - x_j| / (2 n^2 mean)."""
    x = np.asarray(values, dtype=float)
    if x.size == 0 or x.sum() == 0:
        return 0.0
    diff = np.abs(x[:, None] - x[None, :]).sum()
    return float(diff / (2 * x.size ** 2 * x.mean()))


def block_counts(chain: Chain, producers: Iterable[int]) -> list:
    producers = sorted(set(producers))
    counts = dict.fromkeys(producers, 0)
    for b in _blocks(chain):
        if b.header.proposer in counts:
            counts[b.header.proposer] += 1
    return [counts[p] for p in producers]


def gini_decentralisation(chain: Chain, producers: Iterable[int]) -> float:
    producers = list(producers)
    if not producers:
        raise ValueError("need at least one block producer")
    return gini(block_counts(chain, producers))


def inter_block_time(chain: Chain) -> float:
    times = [b.header.commit_time for b in chain]
    return float(np.mean(np.diff(times))) if len(times) > 1 else 0.0


@dataclass
class RunMetrics:
    run_id: str
    M: int
    seed: int
    throughput: float
    avg_latency: float
    gini: float
    backlog: int
    ibt: float = 0.0

    def csv_row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_FIELDS}

    def to_dict(self) -> dict:
        return asdict(self)


def run_metrics(chain: Chain, workload: Sequence[Transaction], producers: Iterable[int],
                run_id: str = "run", M: int = 0, seed: int = 0) -> RunMetrics:
    mean_lat, backlog = avg_transaction_latency(chain, workload)
    return RunMetrics(
        run_id=run_id, M=M, seed=seed,
        throughput=throughput(chain),
        avg_latency=mean_lat,
        gini=gini_decentralisation(chain, producers),
        backlog=backlog,
        ibt=inter_block_time(chain),
    )


@dataclass
class Divergence:
    """reconstructed minus original, absolute and relative; negative
    throughput deltas mean the reconstruction runs slower."""

    throughput: float
    avg_latency: float
    gini: float
    throughput_rel: float
    avg_latency_rel: float
    gini_rel: float

    def to_dict(self) -> dict:
        return asdict(self)


def _rel(new: float, old: float) -> float:
    if old == 0:
        return 0.0 if new == 0 else float("inf") * np.sign(new)
    return (new - old) / abs(old)


def compare_runs(original: RunMetrics, reconstructed: RunMetrics) -> Divergence:
    return Divergence(
        throughput=reconstructed.throughput - original.throughput,
        avg_latency=reconstructed.avg_latency - original.avg_latency,
        gini=reconstructed.gini - original.gini,
        throughput_rel=_rel(reconstructed.throughput, original.throughput),
        avg_latency_rel=_rel(reconstructed.avg_latency, original.avg_latency),
        gini_rel=_rel(reconstructed.gini, original.gini),
    )


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else v


def metrics_csv(rows: Iterable[RunMetrics]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in r.csv_row().items()})
    return buf.getvalue()


def read_metrics_csv(text: str) -> list:
    rows = []
    for d in csv.DictReader(io.StringIO(text)):
        rows.append(RunMetrics(d["run_id"], int(d["M"]), int(d["seed"]), float(d["throughput"]),
                               float(d["avg_latency"]), float(d["gini"]), int(d["backlog"])))
    return rows
