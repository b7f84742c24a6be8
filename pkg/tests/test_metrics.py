import pytest

from twinchain.metrics import (
    RunMetrics, avg_transaction_latency, block_counts, compare_runs, gini, gini_decentralisation,
    inter_block_time, metrics_csv, read_metrics_csv, run_metrics, throughput,
)
from twinchain.model import Chain, Transaction, genesis_block, make_block


def _chain(spec):
    """spec: list of (proposer, commit_time, tx ids)."""
    chain = Chain([genesis_block()])
    for proposer, t, ids in spec:
        txs = [Transaction(i, 0.0, 0.05) for i in ids]
        chain.append(make_block(chain.head.header, proposer, txs).with_commit_time(t))
    return chain


def test_gini_oracles():
    assert gini([5, 5, 5, 5]) == 0.0
    assert gini([10, 0, 0, 0]) == pytest.approx(0.75, abs=1e-12)
    assert gini([3, 2, 1]) == pytest.approx(2 / 9, abs=1e-12)
    assert gini([]) == 0.0 and gini([0, 0]) == 0.0


def test_gini_matches_sorted_formula():
    # independent route: G = (2 sum_i i x_(i)) / (n sum x) - (n + 1) / n
    x = [4, 9, 1, 7, 7, 0, 3]
    s = sorted(x)
    n = len(s)
    alt = 2 * sum((i + 1) * v for i, v in enumerate(s)) / (n * sum(s)) - (n + 1) / n
    assert gini(x) == pytest.approx(alt, abs=1e-12)


def test_throughput_and_latency():
    chain = _chain([(1, 2.0, [0, 1]), (2, 4.0, [2, 3])])
    work = [Transaction(i, float(i) * 0.5, 0.05) for i in range(5)]
    assert throughput(chain) == 1.0
    assert throughput(chain, horizon=8.0) == 0.5
    mean, backlog = avg_transaction_latency(chain, work)
    assert mean == pytest.approx(((2 - 0) + (2 - 0.5) + (4 - 1) + (4 - 1.5)) / 4)
    assert backlog == 1
    assert throughput(Chain([genesis_block()])) == 0.0


def test_decentralisation_counts_idle_producers():
    chain = _chain([(1, 1.0, [0]), (1, 2.0, [1]), (2, 3.0, [2])])
    assert block_counts(chain, range(4)) == [0, 2, 1, 0]
    assert gini_decentralisation(chain, range(4)) == pytest.approx(gini([0, 2, 1, 0]))
    with pytest.raises(ValueError):
        gini_decentralisation(chain, [])


def test_inter_block_time():
    assert inter_block_time(_chain([(1, 2.0, [0]), (2, 3.0, [1])])) == pytest.approx(1.5)


def test_compare_and_csv_round_trip():
    a = RunMetrics("original", 0, 1, 100.0, 0.2, 0.0, 0)
    b = RunMetrics("M3-r0", 3, 7, 90.0, 0.25, 0.1, 0)
    d = compare_runs(a, b)
    assert d.throughput == -10.0 and d.throughput_rel == pytest.approx(-0.1)
    assert d.avg_latency_rel == pytest.approx(0.25)
    assert d.gini_rel == float("inf")
    text = metrics_csv([a, b])
    assert text.splitlines()[0] == "run_id,M,seed,throughput,avg_latency,gini,backlog"
    back = read_metrics_csv(text)
    assert [r.throughput for r in back] == [100.0, 90.0]


def test_run_metrics_bundle():
    chain = _chain([(1, 1.0, [0, 1]), (2, 2.0, [2])])
    work = [Transaction(i, 0.0, 0.05) for i in range(3)]
    m = run_metrics(chain, work, range(3), "x", 0, 5)
    assert m.throughput == 1.5 and m.backlog == 0
    assert m.gini == pytest.approx(gini([0, 1, 1]))
