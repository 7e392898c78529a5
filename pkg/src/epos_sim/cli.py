"""Command-line entry point.

Subcommands:
  run    execute a simulation and emit the JSON/CSV report bundle
  sweep  cross-validate the adversary closed forms against Monte Carlo
  pbft   exhaustive agreement-threshold suite over small committees
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import adversary as adv
from . import pbft
from .harness import RunConfig, emit_report, emit_sweep_csv, run_experiment
from .model import ConfigError, SimulationError, Transaction


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epos-sim",
        description="Deterministic simulator for the e-PoS block-auction scheme")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a simulation experiment")
    run.add_argument("--config", help="JSON config file; flags override its fields")
    run.add_argument("--seed", type=int)
    run.add_argument("--epochs", type=int)
    run.add_argument("--n-range", type=int, nargs=2, metavar=("LO", "HI"))
    run.add_argument("--balance-range", type=int, nargs=2, metavar=("LO", "HI"))
    run.add_argument("--fee-range", type=int, nargs=2, metavar=("LO", "HI"))
    run.add_argument("--mempool-blocks-range", type=int, nargs=2,
                     metavar=("LO", "HI"))
    run.add_argument("--block-size", type=int)
    run.add_argument("--block-time", type=int)
    run.add_argument("--lambda-rate", type=float)
    run.add_argument("--force-epoch-length", type=int, dest="forced_epoch_length")
    run.add_argument("--schemes", nargs="+", choices=["epos", "random", "priority"])
    run.add_argument("--committee-size", type=int)
    run.add_argument("--no-timestamps", action="store_true",
                     help="omit wall-clock timestamps for replay comparison")
    run.add_argument("--out", default="out", help="output directory")

    sweep = sub.add_parser("sweep", help="adversary formula sweep vs Monte Carlo")
    sweep.add_argument("--n-max", type=int, default=10)
    sweep.add_argument("--m-max", type=int, default=2)
    sweep.add_argument("--trials", type=int, default=100_000)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--out", default="sweep.csv")

    thr = sub.add_parser("pbft", help="agreement threshold suite")
    thr.add_argument("--n-max", type=int, default=10)
    return parser


def _run_command(args: argparse.Namespace) -> int:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {}
    for name in ("seed", "epochs", "block_size", "block_time", "lambda_rate",
                 "forced_epoch_length", "committee_size"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    for name in ("n_range", "balance_range", "fee_range", "mempool_blocks_range"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = tuple(value)
    if args.schemes:
        overrides["schemes"] = tuple(args.schemes)
    if args.no_timestamps:
        overrides["include_timestamps"] = False
    if overrides:
        config = dataclasses.replace(config, **overrides)

    report = run_experiment(config)
    paths = emit_report(report, args.out)
    for key in sorted(paths):
        print(f"{key}: {paths[key]}")
    if report.payload.get("stall"):
        print(f"stalled: {report.payload['stall']}", file=sys.stderr)
        return 3
    return 0


def _sweep_command(args: argparse.Namespace) -> int:
    rows = adv.sweep_closed_forms(n_max=args.n_max, m_max=args.m_max,
                                  trials=args.trials, seed=args.seed)
    path = emit_sweep_csv(rows, args.out)
    worst = max(abs(r.empirical - r.closed_form) for r in rows)
    print(f"{len(rows)} rows -> {path} (max |empirical - closed| = {worst:.6f})")
    return 0


def _pbft_command(args: argparse.Namespace) -> int:
    failures = 0
    tx = (Transaction(id=1, fee=1),)
    for n in range(1, args.n_max + 1):
        for faults in range(0, n + 1):
            replicas = [pbft.Replica(node_id=i, local_view=tx,
                                     behavior=(pbft.Behavior.CRASH if i < faults
                                               else pbft.Behavior.HONEST))
                        for i in range(n)]
            outcome = pbft.run_pbft(replicas, primary=0)
            expected = faults <= pbft.fault_tolerance(n)
            status = "ok" if outcome.decided == expected else "MISMATCH"
            if status == "MISMATCH":
                failures += 1
            print(f"n={n} f={faults} decided={outcome.decided} "
                  f"expected={expected} {status}")
    print("threshold suite:", "PASS" if failures == 0 else f"{failures} FAILURES")
    return 0 if failures == 0 else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run_command(args)
        if args.command == "sweep":
            return _sweep_command(args)
        return _pbft_command(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
