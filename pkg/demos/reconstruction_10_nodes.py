"""Ten-node PBFT network: lose three state messages, rebuild, re-run.

    python demos/reconstruction_10_nodes.py [seed] [outdir]
"""

import sys
from pathlib import Path

from twinchain.config import small_net_config
from twinchain.engine import rng_stream
from twinchain.experiments import choose_drop, metrics_of, reconstruct, resimulate, write_reconstruction
from twinchain.simulation import simulate

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
out = Path(sys.argv[2]) if len(sys.argv) > 2 else Path("demo_out/small")

# 10 nodes, 5 peers each, 1000 tx of 0.05 MB at 100 TPS into 1 MB blocks,
# node bandwidths drawn from N(20, 5) MB/s
cfg = small_net_config(seed)
run = simulate(cfg)
orig = metrics_of(run)
print(f"original run: {len(run.chain) - 1} blocks, {len(run.state_messages)} state messages")
print(f"  throughput {orig.throughput:.3f} tx/s  latency {orig.avg_latency:.4f} s  gini {orig.gini:.3f}")

# three nodes never get their state through to the twin
drop = choose_drop(run.topology.ids, 3, rng_stream(seed, "drops"))
rec = reconstruct(run.state_messages, drop, seed, run.topology)
print(f"\ndropped {drop}; report: {rec.report.to_dict()}")

print("\nnode  true mu/sigma     twin mu/sigma     provenance")
for n, e in rec.model.entries.items():
    t = run.topology.node(n).bandwidth
    b = e.state.bandwidth
    print(f"{n:>4}  {t.mean:6.2f} / {t.std:5.2f}   {b.mean:6.2f} / {b.std:5.2f}   {e.provenance.value}")

# a node's estimate comes from the link, and a link is as slow as its slower
# end: a node faster than all of its peers is always underestimated
for n in drop:
    true = run.topology.node(n).bandwidth.mean
    peers = [run.topology.node(p).bandwidth.mean for p in run.topology.node(n).peers]
    if true > max(peers):
        print(f"node {n} is faster than all its peers ({true:.2f} vs <= {max(peers):.2f}): "
              f"twin says {rec.model.entries[n].state.bandwidth.mean:.2f}")

if rec.report.lost:
    print(f"\nlinks between two silent nodes cannot be seen by the twin: {rec.report.lost}")

res = resimulate(rec.topology, run.workload, cfg)
new = res.metrics
print("\nre-simulated on the twin:")
print(f"  throughput {new.throughput:.3f} ({(new.throughput - orig.throughput) / orig.throughput:+.2%})")
print(f"  latency    {new.avg_latency:.4f} ({(new.avg_latency - orig.avg_latency) / orig.avg_latency:+.2%})")
print(f"  gini       {new.gini:.3f} ({new.gini - orig.gini:+.3f})")

write_reconstruction(rec, out, run.topology)
print(f"\nwrote {out}/topology.json, report.json and twin.dot (render with `dot -Tpng`)")
