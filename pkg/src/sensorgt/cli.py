"""Command line entry point: ``simulate``, ``bounds`` and ``compare``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import evaluate_bounds
from .harness import (ExperimentConfig, compare_schemes, emit_results, format_table, load_config,
                      parse_kv, run_experiment, schemes_from_config)
from .protocol import ConfigError
from .topology import TopologyError

EXIT_CONFIG = 2


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scheme", default="gp", help="gp, rwgp, rw, sf or gsf")
    p.add_argument("--graph", default="complete", help="complete | kregular:k | geometric:r")
    p.add_argument("--S", type=int, default=20)
    p.add_argument("--K", type=int, default=1)
    p.add_argument("--L", type=int, default=5)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--mode", default="rm", help="rm or dm")
    p.add_argument("--rounds", type=int, default=30)
    p.add_argument("--realizations", type=int, default=10)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sensorgt",
                                     description="Gossip-based group testing simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one experiment and write its curves")
    _add_experiment_flags(sim)
    sim.add_argument("--out", default="results.csv")
    sim.add_argument("--format", choices=["csv", "json"], default=None,
                     help="defaults to the --out suffix, else csv")

    b = sub.add_parser("bounds", help="evaluate the closed-form quantities as JSON")
    b.add_argument("--S", type=int, required=True)
    b.add_argument("--K", type=int, default=1)
    b.add_argument("--L", type=int, default=5)
    b.add_argument("--p", type=float, default=1.0)
    b.add_argument("--q", type=float, default=0.15)
    b.add_argument("--delta", type=float, default=None)
    b.add_argument("--B", type=int, default=None)

    cmp_ = sub.add_parser("compare", help="rounds-to-threshold for several schemes")
    cmp_.add_argument("--config", required=True,
                      help="key=value file; 'scheme' may list several, comma separated")
    cmp_.add_argument("--threshold", type=float, default=0.9)
    cmp_.add_argument("--out", default=None, help="write the table here instead of stdout")
    return parser


def _simulate(args) -> int:
    config = ExperimentConfig(
        scheme=args.scheme, graph=args.graph, S=args.S, K=args.K, L=args.L, alpha=args.alpha,
        p=args.p, mode=args.mode, rounds=args.rounds, realizations=args.realizations,
        trials=args.trials, seed=args.seed, delta=args.delta, workers=args.workers)
    fmt = args.format or (Path(args.out).suffix.lstrip(".").lower() or "csv")
    if fmt not in ("csv", "json"):
        fmt = "csv"
    curves = run_experiment(config)
    path = emit_results(curves, fmt, args.out)
    hit = curves.rounds_to(0.9)
    print(f"wrote {path} ({curves.rounds} rounds); rounds to 0.9: "
          f"{hit if hit is not None else 'not reached'}")
    return 0


def _bounds(args) -> int:
    print(json.dumps(evaluate_bounds(args.S, args.K, args.L, args.p, args.q, args.delta, args.B),
                     indent=2, sort_keys=True))
    return 0


def _compare(args) -> int:
    kv = parse_kv(Path(args.config).read_text())
    schemes = kv.pop("scheme", "gp").split(",")
    base = ExperimentConfig.from_mapping(kv)
    table = format_table(compare_schemes(schemes_from_config(base, schemes), args.threshold))
    if args.out:
        Path(args.out).write_text(table)
    else:
        sys.stdout.write(table)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"simulate": _simulate, "bounds": _bounds, "compare": _compare}[args.command]
    try:
        return handler(args)
    except (ConfigError, TopologyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # enum coercion and numeric parsing failures are configuration problems too
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
