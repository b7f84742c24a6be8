"""End-to-end runs: simulate, reconstruct, re-simulate and sweep.

A run directory holds everything needed to reproduce it::

    config.json  topology.json  workload.jsonl  chain.json
    state_messages.jsonl  metrics.csv  metrics.json  [trace.jsonl]
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .config import SimConfig
from .engine import dump_trace, rng_stream
from .metrics import Divergence, RunMetrics, compare_runs, metrics_csv, run_metrics
from .model import Chain, Transaction
from .monitor import read_state_messages, write_state_messages
from .network import Topology
from .simulation import SimulationResult, simulate
from .twin import ReconstructionReport, TwinModel, asynchronous_delivery, reconstruct_global_state, to_dot
from .workload import read_workload, write_workload

log = logging.getLogger(__name__)

METRIC_NAMES = ("throughput", "avg_latency", "gini")


def _write(path: Path, text: str) -> None:
    path.write_text(text)


def metrics_of(result: SimulationResult, run_id: str = "original", M: int = 0, seed: Optional[int] = None,
               producers: Optional[Iterable[int]] = None) -> RunMetrics:
    producers = result.topology.ids if producers is None else producers
    return run_metrics(result.chain, result.workload, producers, run_id, M,
                       result.config.seed if seed is None else seed)


def write_run(result: SimulationResult, out, run_id: str = "original") -> RunMetrics:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    m = metrics_of(result, run_id)
    _write(out / "config.json", result.config.to_json())
    _write(out / "topology.json", result.topology.to_json())
    write_workload(result.workload, out / "workload.jsonl")
    _write(out / "chain.json", json.dumps(result.chain.to_dict(), sort_keys=True) + "\n")
    write_state_messages(result.state_messages, out / "state_messages.jsonl")
    _write(out / "metrics.csv", metrics_csv([m]))
    _write(out / "metrics.json", json.dumps(m.to_dict(), indent=1, sort_keys=True) + "\n")
    if result.trace is not None:
        dump_trace(result.trace, out / "trace.jsonl")
    return m


@dataclass
class RunArtifacts:
    config: SimConfig
    topology: Topology
    workload: list
    chain: Chain
    state_messages: list

    def metrics(self, run_id: str = "original") -> RunMetrics:
        return run_metrics(self.chain, self.workload, self.topology.ids, run_id, 0, self.config.seed)


def load_run(path) -> RunArtifacts:
    path = Path(path)
    config = SimConfig.load(path / "config.json")
    topology = Topology.from_json((path / "topology.json").read_text(), config.bandwidth_floor)
    return RunArtifacts(
        config=config,
        topology=topology,
        workload=read_workload(path / "workload.jsonl"),
        chain=Chain.from_dict(json.loads((path / "chain.json").read_text())),
        state_messages=read_state_messages(path / "state_messages.jsonl"),
    )


def derived_seed(seed: int, *key: int) -> int:
    """Stable 63-bit seed for a sub-run."""
    return int(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *key]).generate_state(1, np.uint64)[0] >> 1)


def choose_drop(senders: Sequence[int], count: int, rng: np.random.Generator) -> list:
    senders = sorted(set(senders))
    if not 0 <= count < len(senders):
        raise ValueError(f"can drop between 0 and {len(senders) - 1} of {len(senders)} senders, got {count}")
    return sorted(int(s) for s in rng.choice(senders, count, replace=False)) if count else []


@dataclass
class Reconstruction:
    model: TwinModel
    report: ReconstructionReport
    topology: Topology
    dropped: list


def reconstruct(messages: Sequence, drop: Iterable[int], seed: int, reference: Optional[Topology] = None,
                floor: float = 0.1, latency: float = 0.0) -> Reconstruction:
    drop = sorted(set(drop))
    delivered = asynchronous_delivery(messages, drop, rng_stream(seed, "reorder"))
    model, report = reconstruct_global_state(delivered, reference, floor=floor, latency=latency)
    return Reconstruction(model, report, model.to_topology(), drop)


def write_reconstruction(rec: Reconstruction, out, reference: Optional[Topology] = None) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "topology.json", rec.topology.to_json())
    report = rec.report.to_dict()
    report["dropped"] = rec.dropped
    _write(out / "report.json", json.dumps(report, indent=1, sort_keys=True) + "\n")
    _write(out / "twin.dot", to_dot(rec.model, reference))


@dataclass
class Resimulation:
    result: SimulationResult
    metrics: RunMetrics
    disconnected: bool = False
    kept_nodes: list = field(default_factory=list)


def resimulate(topology: Topology, workload: Sequence[Transaction], config: SimConfig,
               run_id: str = "reconstructed", M: int = 0, seed: Optional[int] = None) -> Resimulation:
    """Replay ``workload`` on ``topology`` with the run's settings.

    A disconnected topology is cut down to its largest component and the
    run is flagged. Node ids are relabelled densely when needed; workload
    ingress nodes outside the kept set are folded onto it.
    """
    comps = topology.components()
    disconnected = len(comps) > 1
    if disconnected:
        log.warning("reconstructed topology has %d components; simulating the largest (%d nodes)",
                    len(comps), len(comps[0]))
        topology = topology.subgraph(comps[0])
    kept = topology.ids
    if kept != list(range(len(kept))):
        topology, old_ids = topology.relabel()
        new_of = {o: i for i, o in enumerate(old_ids)}
        n = len(old_ids)
        workload = [Transaction(tx.id, tx.arrival_time, tx.size, new_of.get(tx.ingress, tx.ingress % n))
                    for tx in workload]
    cfg = config.replace(nodes=len(topology), peers_per_node=min(config.peers_per_node, len(topology) - 1))
    result = simulate(cfg, topology, list(workload))
    m = metrics_of(result, run_id, M, config.seed if seed is None else seed)
    return Resimulation(result, m, disconnected, kept)


@dataclass
class SweepRow:
    M: int
    repeat: int
    seed: int
    dropped: list
    metrics: RunMetrics
    divergence: Divergence
    lost_links: int
    disconnected: bool


def _sweep_one(args) -> SweepRow:
    messages, reference, workload, config, original, M, r, seed = args
    rseed = derived_seed(seed, M, r)
    drop = choose_drop(reference.ids, M, rng_stream(rseed, "drops"))
    rec = reconstruct(messages, drop, rseed, reference, config.bandwidth_floor, config.latency)
    res = resimulate(rec.topology, workload, config, f"M{M}-r{r}", M, rseed)
    return SweepRow(M, r, rseed, drop, res.metrics, compare_runs(original, res.metrics),
                    rec.report.lost_links or 0, res.disconnected)


def sweep(artifacts: RunArtifacts, m_levels: Sequence[int], repeats: int, seed: int,
          workers: int = 1, progress=None) -> list:
    """For each M, ``repeats`` random drop sets: reconstruct, re-simulate,
    compare with the original. Rows come back sorted by (M, repeat)."""
    n = len(artifacts.topology)
    bad = [m for m in m_levels if not 0 <= m < n]
    if bad:
        raise ValueError(f"M levels must lie in [0, {n}), got {bad}")
    original = artifacts.metrics()
    jobs = [
        (artifacts.state_messages, artifacts.topology, artifacts.workload, artifacts.config, original, M, r, seed)
        for M in m_levels for r in range(repeats)
    ]
    rows = []
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            for row in pool.map(_sweep_one, jobs):
                rows.append(row)
                if progress:
                    progress(row)
    else:
        for job in jobs:
            row = _sweep_one(job)
            rows.append(row)
            if progress:
                progress(row)
    rows.sort(key=lambda row: (row.M, row.repeat))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    return metrics_csv(row.metrics for row in rows)


def sweep_summary(rows: Sequence[SweepRow]) -> list:
    """Per-M quartiles of each metric's absolute and relative delta."""
    out = []
    for M in sorted({r.M for r in rows}):
        level = [r for r in rows if r.M == M]
        d = {"M": M, "runs": len(level), "lost_links_median": float(np.median([r.lost_links for r in level]))}
        for name in METRIC_NAMES:
            for suffix in ("", "_rel"):
                vals = np.array([getattr(r.divergence, name + suffix) for r in level])
                q1, med, q3 = np.percentile(vals, [25, 50, 75])
                d[f"{name}{suffix}_q1"] = float(q1)
                d[f"{name}{suffix}_median"] = float(med)
                d[f"{name}{suffix}_q3"] = float(q3)
        out.append(d)
    return out


def summary_csv(summary: Sequence[dict]) -> str:
    if not summary:
        return ""
    keys = list(summary[0])
    lines = [",".join(keys)]
    for d in summary:
        lines.append(",".join(repr(d[k]) if isinstance(d[k], float) else str(d[k]) for k in keys))
    return "\n".join(lines) + "\n"


def plot_sweep(rows: Sequence[SweepRow], original: RunMetrics, path) -> bool:
    """Box plots of each metric per M against the original value. Returns
    False when matplotlib is unavailable."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return False
    levels = sorted({r.M for r in rows})
    fig, axes = plt.subplots(1, 3, figsize=(13, 3.8))
    for ax, name in zip(axes, METRIC_NAMES):
        data = [[getattr(r.metrics, name) for r in rows if r.M == M] for M in levels]
        ax.boxplot(data)
        ax.set_xticks(range(1, len(levels) + 1), [str(M) for M in levels])
        ax.axhline(getattr(original, name), color="red", lw=1, ls="--", label="original")
        ax.set_xlabel("missing state messages (M)")
        ax.set_title(name)
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return True


def write_sweep(rows: Sequence[SweepRow], original: RunMetrics, out) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "sweep.csv", sweep_csv(rows))
    _write(out / "original.csv", metrics_csv([original]))
    _write(out / "summary.csv", summary_csv(sweep_summary(rows)))
    plot_sweep(rows, original, out / "sweep.png")
