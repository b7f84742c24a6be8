"""Fifty nodes: how far does the twin drift as more state messages go missing?

    python demos/sweep_50_nodes.py [repeats] [seed] [outdir]

For each M, ``repeats`` random sets of M silent nodes; each reconstruction
replays the original workload and is compared with the original run.
20 repeats takes several minutes on one core.
"""

import sys
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from twinchain.config import large_net_config
from twinchain.experiments import RunArtifacts, sweep, sweep_summary, write_sweep
from twinchain.simulation import simulate

repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 20
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 1
out = Path(sys.argv[3]) if len(sys.argv) > 3 else Path("demo_out/sweep")
levels = [3, 5, 7, 9, 12, 15, 20]

cfg = large_net_config(seed)
run = simulate(cfg)
art = RunArtifacts(cfg, run.topology, run.workload, run.chain, run.state_messages)
original = art.metrics()
print(f"original: throughput {original.throughput:.4f}, latency {original.avg_latency:.4f}, gini {original.gini:.3f}")


def progress(row):
    if row.repeat == repeats - 1:
        print(f"  M={row.M} done", flush=True)


rows = sweep(art, levels, repeats, seed, progress=progress)
summary = sweep_summary(rows)

print("\n  M  lost links  throughput rel (q1 / med / q3)        latency rel median   gini median")
for d in summary:
    print(f"{d['M']:>3}  {d['lost_links_median']:10.1f}  "
          f"{d['throughput_rel_q1']:+.2e} / {d['throughput_rel_median']:+.2e} / {d['throughput_rel_q3']:+.2e}"
          f"   {d['avg_latency_rel_median']:+.4f}            {d['gini_median']:+.3f}")

med = [np.median([abs(r.divergence.throughput_rel) for r in rows if r.M == M]) for M in levels]
print(f"\nSpearman(M, median |throughput delta|) = {spearmanr(levels, med).statistic:.3f}")
slower = np.mean([r.metrics.throughput <= original.throughput for r in rows])
print(f"reconstructions no faster than the original: {slower:.0%}")

write_sweep(rows, original, out)
print(f"wrote {out}/sweep.csv, summary.csv, original.csv, sweep.png")
