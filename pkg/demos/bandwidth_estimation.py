"""Passive bandwidth estimation from consensus traffic.

Every node divides each received message's size by its delay and averages
the ratios per peer. With fixed bandwidths that recovers the slower end of
the link exactly; with noisy ones it sits a little under the slower mean.
"""

import numpy as np

from twinchain.model import GaussianSpec
from twinchain.monitor import Monitor
from twinchain.network import GossipNetwork, Topology
from twinchain.engine import rng_stream

means = [24.5, 19.0, 21.0, 15.5]
edges = [(0, 1), (0, 2), (1, 2), (2, 3), (1, 3)]

for label, frac in (("fixed", 0.0), ("noisy", 0.08)):
    specs = {i: GaussianSpec(m, frac * m) for i, m in enumerate(means)}
    topo = Topology.from_edges(specs, edges)
    net = GossipNetwork(topo)
    mon = Monitor(topo.nodes)
    # a mix of 1 MB blocks and tiny votes, each flooded from a rotating origin
    for k in range(600):
        size = 1.0 if k % 10 == 0 else 0.001
        mon.observe_flood(net.flood(k % len(means), size, rng_stream(7, "demo", k)))

    print(f"\n{label} bandwidths")
    print("observer  peer   estimate   sigma   samples   min(mu_i, mu_j)")
    for l in sorted(topo.links, key=lambda l: l.endpoints):
        for u, v in ((l.a, l.b), (l.b, l.a)):
            e = mon.estimate(u, v)
            print(f"{u:>8} {v:>5}   {e.mean:8.3f}  {e.std:6.3f}   {e.samples:7d}   {min(means[u], means[v]):8.3f}")

# node 0 is the fastest of its neighbourhood, so whatever its peers report
# about it is capped by their own speed
est = [mon.estimate(p, 0).mean for p in topo.node(0).peers]
print(f"\nnode 0 true mean {means[0]}, best peer estimate {max(est):.2f}")

# expected value of min(X, Y) for the noisy 0-2 link, by simulation
rng = np.random.default_rng(0)
x = rng.normal(means[0], 0.08 * means[0], 200_000)
y = rng.normal(means[2], 0.08 * means[2], 200_000)
print(f"E[min] for link 0-2 by Monte Carlo: {np.minimum(x, y).mean():.3f}")
