"""Command line front end: run, sweep, oracle, partition.

Exit codes: 0 success, 1 oracle check failed, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import records
from .config import ConfigError, load_config, resolved_text
from .dataio import IdxFormatError
from .diversity import gini_simpson, label_distribution
from .instances import load_instance
from .scheduler import ORACLE_MAX_DEVICES, InfeasibleScheduleError, brute_force_oracle, schedule_das
from .simulator import RoundFailedError, load_data, make_partition, run_experiment, run_sweep

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = _out_dir(args.out)
    (out / "config.resolved.ini").write_text(resolved_text(cfg))
    try:
        result = run_experiment(cfg)
    except RoundFailedError as exc:
        records.write_json({"failed": True, "error": str(exc), "round": exc.round_index}, out / "summary.json")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    records.write_rounds_csv(records.records(result), out / "rounds.csv")
    records.write_json(result.summary(), out / "summary.json")
    print(
        f"{records.experiment_id(result)}: {len(result.rounds)} rounds, "
        f"final accuracy {result.final_accuracy:.4f}, energy {result.total_energy_j:.4g} J"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.seed)
    if args.runs < 1 or args.jobs < 1:
        raise ConfigError("--runs and --jobs must be >= 1")
    out = _out_dir(args.out)
    (out / "config.resolved.ini").write_text(resolved_text(cfg))
    sweep = run_sweep(cfg, args.runs, cfg.seed, args.jobs)
    runs_dir = _out_dir(out / "runs")
    rows = []
    for result in sorted(sweep.results, key=lambda r: r.seed):
        recs = records.records(result)
        records.write_rounds_csv(recs, runs_dir / f"{records.experiment_id(result)}.csv")
        rows += recs
    records.write_rounds_csv(rows, out / "rounds.csv")
    records.write_curves_csv(sweep.curves, out / "mean_curves.csv")
    records.write_json(
        {
            "runs": args.runs,
            "completed": len(sweep.results),
            "failed": len(sweep.failures),
            "failures": [{"seed": s, "error": e} for s, e in sweep.failures],
            "per_run": [r.summary() for r in sorted(sweep.results, key=lambda r: r.seed)],
        },
        out / "summary.json",
    )
    print(f"{len(sweep.results)}/{args.runs} runs completed, {len(sweep.failures)} failed")
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        inst = load_instance(args.instance)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{args.instance}: {exc}") from None
    K = len(inst.devices)
    if K > ORACLE_MAX_DEVICES:
        raise ConfigError(f"{args.instance}: {K} devices exceeds the oracle limit of {ORACLE_MAX_DEVICES}")
    try:
        das = schedule_das(inst.devices, inst.index, inst.params, inst.config)
        best = brute_force_oracle(inst.devices, inst.index, inst.params, inst.config)
    except InfeasibleScheduleError as exc:
        raise ConfigError(f"{args.instance}: infeasible instance: {exc}") from None
    gap = relative_gap(das.objective, best.objective)
    report = {"das": das.to_dict(), "oracle": best.to_dict(), "gap": gap, "threshold": args.threshold}
    print(json.dumps(report, indent=2))
    return EXIT_OK if gap <= args.threshold else EXIT_CHECK_FAILED


def relative_gap(value: float, reference: float) -> float:
    """How far ``value`` falls short of the (maximized) ``reference``."""
    shortfall = max(reference - value, 0.0)
    return shortfall / abs(reference) if reference != 0 else shortfall


def cmd_partition(args) -> int:
    cfg = load_config(args.config, args.seed)
    d = cfg.data
    dataset = load_data(d)
    part = make_partition(cfg, dataset)
    counts = part.shard_counts()
    rows = [
        (k, idx.size, gini_simpson(label_distribution(dataset.labels[idx], dataset.num_classes)), int(counts[k]))
        for k, idx in enumerate(part.device_indices)
    ]
    print(f"{part.num_shards} shards of {d.shard_size} formed, {int(counts.sum())} dealt to {cfg.num_devices} devices")
    print(f"{'device':>6} {'size':>6} {'gini_simpson':>12} {'shards':>6}")
    for k, size, g, n in rows:
        print(f"{k:>6} {size:>6} {g:>12.4f} {n:>6}")
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["device", "dataset_size", "gini_simpson", "shards"])
            for k, size, g, n in rows:
                w.writerow([k, size, repr(float(g)), n])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="feelsched", description="Diversity-aware scheduling for federated edge learning.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int, help="overrides sim.seed")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="independent runs with consecutive seeds, plus mean curves")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--runs", type=int, default=50)
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--seed", type=int, help="base seed; overrides sim.seed")
    sweep.set_defaults(func=cmd_sweep)

    oracle = sub.add_parser("oracle", help="compare DAS with exhaustive search on a small instance")
    oracle.add_argument("instance")
    oracle.add_argument("--threshold", type=float, default=0.05)
    oracle.set_defaults(func=cmd_oracle)

    part = sub.add_parser("partition", help="show the shard partition a config produces")
    part.add_argument("--config", required=True)
    part.add_argument("--seed", type=int)
    part.add_argument("--csv", help="also write the table as CSV")
    part.set_defaults(func=cmd_partition)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, IdxFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
