"""Command-line entry point.

Usage::

    fixpoint-lab run --config exp.json [--seed N] [--out PATH] [--full] [--jobs N]
    fixpoint-lab validate --config exp.json
    fixpoint-lab list
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .operators import CATALOG
from .runner import EXIT_CONFIG, EXIT_OK, run_experiment
from .verify import SUITES


def list_catalog() -> str:
    lines = ["operators:"]
    lines += [f"  {name:<12} {CATALOG[name][1]}" for name in sorted(CATALOG)]
    lines.append("suites:")
    lines += [f"  {name:<16} {SUITES[name].split(': ', 1)[1]}" for name in sorted(SUITES)]
    return "\n".join(lines)


def _read(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([("<file>", str(exc))]) from None
    if not isinstance(data, dict):
        raise ConfigError([("<root>", "config must be a JSON object")])
    return data


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fixpoint-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output file (relative paths resolve under $FIXPOINT_LAB_OUT)")
    run.add_argument("--full", action="store_true", default=None, help="include iterates in JSON traces")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for multi-seed suites")

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True)

    sub.add_parser("list", help="list operators and suites")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print(list_catalog())
        return EXIT_OK
    if args.command == "validate":
        try:
            cfg, _ = load_config(args.config)
        except ConfigError as exc:
            for path, msg in exc.errors:
                print(f"{path}: {msg}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"ok: {cfg.run} on {cfg.operator.name}")
        return EXIT_OK
    try:
        data = _read(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = run_experiment(data, out=args.out, seed=args.seed, full=args.full, jobs=args.jobs)
    stream = sys.stderr if result.status == EXIT_CONFIG else sys.stdout
    print(result.summary, file=stream)
    for path in result.outputs:
        print(f"wrote {path}")
    return result.status


if __name__ == "__main__":
    sys.exit(main())
