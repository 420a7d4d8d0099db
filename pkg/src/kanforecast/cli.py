"""Command line entry point: ``kanforecast run config.json [--seed N] [--models A,B] [--targets T2M,PS] [--out DIR]``."""

from __future__ import annotations

import argparse
import sys

from .benchmark import load_config, run_benchmark
from .errors import ConfigurationError


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kanforecast", description="Weather forecasting benchmark harness.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="train and evaluate every (city, target, model) job in a config")
    run.add_argument("config", help="JSON benchmark config")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--models", type=_csv_list, help="comma-separated model kinds")
    run.add_argument("--targets", type=_csv_list, help="comma-separated target variables")
    run.add_argument("--out", help="output directory")
    run.add_argument("--workers", type=int, help="parallel jobs")
    run.add_argument("--epochs", type=int, help="override the epoch budget")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
        if args.models:
            config.models = args.models
        if args.targets:
            config.targets = args.targets
        if args.out:
            config.output_dir = args.out
        if args.workers is not None:
            config.workers = args.workers
        if args.epochs is not None:
            config.train["epochs"] = args.epochs
            config.train["patience"] = min(config.train.get("patience", 15), args.epochs)
        manifest = run_benchmark(config)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    failed = [j for j in manifest["jobs"] if not j["ok"]]
    for j in manifest["jobs"]:
        status = "ok" if j["ok"] else f"FAILED ({j['error']})"
        print(f"{j['city']:>12} {j['target']:>5} {j['model']:<10} {status}")
    print(f"reports written to {config.output_dir}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
