"""Command line front-end.

    twinchain simulate    --config cfg.json --out runs/a [--seed N] [--trace]
    twinchain reconstruct --run runs/a --drop 3 --seed 7 --out runs/a/rec
    twinchain resimulate  --run runs/a --topology runs/a/rec/topology.json --out runs/a/resim
    twinchain sweep       --config cfg.json --m-levels 3,5,7 --repeats 20 --seed 1 --out runs/sweep
    twinchain metrics     --run runs/a
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, SimConfig
from .engine import rng_stream
from .experiments import (
    choose_drop,
    load_run,
    reconstruct,
    resimulate,
    sweep,
    write_reconstruction,
    write_run,
    write_sweep,
)
from .metrics import compare_runs, metrics_csv
from .monitor import read_state_messages
from .network import Topology
from .simulation import simulate

log = logging.getLogger("twinchain")


class UsageError(Exception):
    pass


def parse_drop(text: str):
    """``"3"`` or ``"count:3"`` is a count; ``"ids:1,8"`` or ``"1,8"`` are ids."""
    text = text.strip()
    if text.startswith("count:"):
        return "count", int(text[6:])
    if text.startswith("ids:"):
        body = text[4:]
        return "ids", [int(x) for x in body.split(",") if x.strip()]
    if "," in text:
        return "ids", [int(x) for x in text.split(",") if x.strip()]
    return "count", int(text)


def parse_levels(text: str) -> list:
    return [int(x) for x in text.split(",") if x.strip()]


def _load_config(args) -> SimConfig:
    if args.config is None:
        raise UsageError("--config is required")
    return SimConfig.load(args.config, seed=args.seed)


def _print_metrics(m, stream=sys.stdout):
    stream.write(metrics_csv([m]))


def cmd_simulate(args) -> int:
    config = _load_config(args)
    result = simulate(config, trace=args.trace)
    m = write_run(result, args.out)
    _print_metrics(m)
    return 0


def cmd_reconstruct(args) -> int:
    if args.run:
        run = load_run(args.run)
        messages, reference = run.state_messages, run.topology
    elif args.messages:
        messages = read_state_messages(args.messages)
        reference = None
    else:
        raise UsageError("give --run DIR or --messages FILE")
    if args.reference:
        reference = Topology.from_json(Path(args.reference).read_text())
    senders = sorted({m.sender for m in messages})
    if args.seed is None:
        raise UsageError("--seed is required")
    kind, value = parse_drop(args.drop)
    if kind == "count":
        if value >= len(senders):
            raise UsageError(f"--drop: M={value} must be smaller than the number of nodes ({len(senders)})")
        drop = choose_drop(senders, value, rng_stream(args.seed, "drops"))
    else:
        drop = value
        if len(set(drop)) >= len(senders):
            raise UsageError("--drop: cannot drop every node's state messages")
    rec = reconstruct(messages, drop, args.seed, reference)
    write_reconstruction(rec, args.out, reference)
    report = rec.report.to_dict()
    report["dropped"] = rec.dropped
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_resimulate(args) -> int:
    if not args.run or not args.topology:
        raise UsageError("--run and --topology are required")
    run = load_run(args.run)
    topology = Topology.from_json(Path(args.topology).read_text(), run.config.bandwidth_floor)
    res = resimulate(topology, run.workload, run.config)
    out = Path(args.out)
    write_run(res.result, out, run_id="reconstructed")
    original = run.metrics()
    div = compare_runs(original, res.metrics)
    (out / "comparison.json").write_text(
        json.dumps({"original": original.to_dict(), "reconstructed": res.metrics.to_dict(),
                    "divergence": div.to_dict(), "disconnected": res.disconnected}, indent=1, sort_keys=True) + "\n"
    )
    if res.disconnected:
        log.warning("reconstruction was disconnected; only the largest component was simulated")
    sys.stdout.write(metrics_csv([original, res.metrics]))
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args)
    if args.m_levels is None:
        raise UsageError("--m-levels is required")
    levels = parse_levels(args.m_levels)
    bad = [m for m in levels if not 0 <= m < config.nodes]
    if bad:
        raise UsageError(f"--m-levels: every M must be in [0, {config.nodes}), got {bad}")
    out = Path(args.out)
    result = simulate(config)
    write_run(result, out / "original")
    run = load_run(out / "original")
    done = [0]
    total = len(levels) * args.repeats

    def progress(row):
        done[0] += 1
        log.info("[%d/%d] M=%d repeat=%d throughput=%.4f", done[0], total, row.M, row.repeat, row.metrics.throughput)

    rows = sweep(run, levels, args.repeats, config.seed, workers=args.workers, progress=progress)
    write_sweep(rows, run.metrics(), out)
    print(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")
    return 0


def cmd_metrics(args) -> int:
    if not args.run:
        raise UsageError("--run is required")
    run = load_run(args.run)
    m = run.metrics()
    text = metrics_csv([m])
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twinchain", description="PBFT blockchain simulator and digital-twin state mirroring.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one simulation and write its artifacts")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--trace", action="store_true", help="also dump the event trace as JSONL")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("reconstruct", help="rebuild the network from a subset of state messages")
    s.add_argument("--run", help="run directory (state messages + reference topology)")
    s.add_argument("--messages", help="state message JSONL, if not using --run")
    s.add_argument("--reference", help="original topology JSON, to report lost links")
    s.add_argument("--drop", default="0", help="count M, or ids as 'ids:1,8' / '1,8'")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("resimulate", help="replay a run's workload on a reconstructed topology")
    s.add_argument("--run", required=True)
    s.add_argument("--topology", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_resimulate)

    s = sub.add_parser("sweep", help="repeat reconstruction + re-simulation for several M")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--m-levels", required=True)
    s.add_argument("--repeats", type=int, default=100)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("metrics", help="recompute a run's metrics from its chain and workload")
    s.add_argument("--run", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError, ValueError, FileNotFoundError) as exc:
        print(f"twinchain {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
