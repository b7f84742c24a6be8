import pytest

from twinchain.config import small_net_config
from twinchain.model import GaussianSpec, NodeState
from twinchain.network import Topology
from twinchain.simulation import simulate


@pytest.fixture(scope="session")
def small_run():
    return simulate(small_net_config(1))


def make_topology(means, edges, stds=None, latency=0.0):
    """Hand-built topology: ``means[i]`` is node i's bandwidth mean."""
    stds = stds or [0.0] * len(means)
    specs = {i: GaussianSpec(m, s) for i, (m, s) in enumerate(zip(means, stds))}
    return Topology.from_edges(specs, edges, latency)


def node(i, mean=10.0, peers=(), std=0.0):
    return NodeState(i, GaussianSpec(mean, std), frozenset(peers))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
