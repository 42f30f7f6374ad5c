"""Command-line entry point.

Subcommands: train, bench-query, probe, eval. Exit codes: 0 success,
1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from lshsoftmax.config import load_config
from lshsoftmax.errors import ConfigError


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML or JSON config file")
    p.add_argument("--out", help="output directory (overrides run.out_dir)")
    p.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
    p.add_argument("--sampler", help="sampler kind")
    p.add_argument("--n-samples", type=int, dest="n_samples", help="negative budget")
    p.add_argument("--hash", dest="hash_family", help="hash family: simhash or dwta")
    p.add_argument("--k", type=int, help="hash functions per table")
    p.add_argument("--l", type=int, help="number of hash tables")
    p.add_argument("--m", type=int, help="winner-take-all bin size")
    p.add_argument("--capacity", type=int, help="bucket capacity (0 = unbounded)")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--clock", choices=["real", "iteration"])


def _overrides(args) -> dict:
    return {
        "run.out_dir": args.out,
        "run.seed": args.seed,
        "run.clock": args.clock,
        "sampler.kind": args.sampler,
        "sampler.n_samples": args.n_samples,
        "hash.family": args.hash_family,
        "hash.k": args.k,
        "hash.l": args.l,
        "hash.m": args.m,
        "hash.capacity": args.capacity,
        "train.batch_size": args.batch_size,
        "train.epochs": args.epochs,
        "optimizer.lr": args.lr,
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lshsoftmax",
        description="Train huge-output softmax classifiers on CPU with "
                    "hash-table negative sampling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run training, write metrics/checkpoint/figures")
    _add_common(p_train)
    p_train.add_argument("--log-every", type=int, default=None, help="print progress every N iterations")

    p_bench = sub.add_parser("bench-query", help="measure query cost against store size")
    _add_common(p_bench)
    p_bench.add_argument("--ns", default="1000,10000,100000",
                         help="comma-separated store sizes")
    p_bench.add_argument("--queries", type=int, default=10000)

    p_probe = sub.add_parser("probe", help="compare sampler distribution to the softmax target")
    _add_common(p_probe)
    p_probe.add_argument("--checkpoint", required=True)
    p_probe.add_argument("--draws", type=int, default=200)
    p_probe.add_argument("--probe-inputs", type=int, default=20)

    p_eval = sub.add_parser("eval", help="full-scoring precision of a checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    from lshsoftmax import driver  # deferred: keeps --help fast

    try:
        if args.command == "train":
            result = driver.run_train(cfg, log_every=args.log_every)
            print(f"final P@1 {result['final_p_at_1']:.4f} after {result['iterations']} iterations")
            print(f"total wall clock {result['wall_clock_s']:.1f}s")
            print(f"metrics: {result['metrics']}")
            print(f"checkpoint: {result['checkpoint']}")
        elif args.command == "bench-query":
            ns = [int(x) for x in args.ns.split(",") if x]
            rows = driver.run_bench_query(cfg, ns, n_queries=args.queries)
            print(f"{'N':>10}  {'mean query (us)':>16}  {'hash evals':>10}")
            for r in rows:
                print(f"{r.num_classes:>10}  {r.mean_query_s * 1e6:>16.2f}  {r.hash_evals_per_query:>10}")
        elif args.command == "probe":
            if not Path(args.checkpoint).exists():
                print(f"error: checkpoint not found: {args.checkpoint}", file=sys.stderr)
                return 2
            report = driver.run_probe(cfg, args.checkpoint, draws=args.draws,
                                      n_probe_inputs=args.probe_inputs)
            print(f"iteration {report.iteration}: TV(empirical, uniform) = {report.tv_uniform:.4f}, "
                  f"TV(empirical, target) = {report.tv_target:.4f}")
        elif args.command == "eval":
            if not Path(args.checkpoint).exists():
                print(f"error: checkpoint not found: {args.checkpoint}", file=sys.stderr)
                return 2
            result = driver.run_eval(cfg, args.checkpoint)
            for key, value in result.items():
                print(f"{key}: {value:.4f}" if isinstance(value, float) else f"{key}: {value}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
