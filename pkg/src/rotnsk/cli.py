"""Command line entry point: ``rotnsk <subcommand> --config FILE``.

Subcommands are the experiment kinds plus ``validate`` (parse and check a
configuration) and ``report`` (re-summarize an existing result directory).
Invalid configurations exit with status 2 and a message naming the first
violated constraint; monitor trips during a run are results, not errors,
and exit with status 0.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import EXPERIMENT_KINDS, load_config
from .errors import ConfigurationError
from .experiments import format_summary, persist, read_results, run_experiment

log = logging.getLogger("rotnsk")

EXIT_OK = 0
EXIT_CONFIG = 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rotnsk", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    for kind in EXPERIMENT_KINDS + ("validate",):
        p = sub.add_parser(kind, parents=[common], help=f"run the {kind} experiment" if kind != "validate" else "check a configuration")
        p.add_argument("--config", required=True, type=Path, help="configuration file")
        p.add_argument("--seed", type=int, default=None, help="override [experiment] seed")
        if kind != "validate":
            p.add_argument("--out", type=Path, default=None, help="base output directory")
            p.add_argument("--workers", type=int, default=None, help="worker processes for sweep points")
    rp = sub.add_parser("report", parents=[common], help="summarize an existing result directory")
    rp.add_argument("directory", type=Path)
    return ap


def _report(directory: Path) -> int:
    summary = directory / "summary.txt"
    results = directory / "results.csv"
    if not results.exists():
        print(f"error: {results} not found", file=sys.stderr)
        return EXIT_CONFIG
    rows = read_results(results)
    print(f"rows = {len(rows)}")
    if rows:
        print(f"kind = {rows[0]['kind']}")
        print(f"config_hash = {rows[0]['config_hash']}")
    if summary.exists():
        sys.stdout.write(summary.read_text())
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    if args.command == "report":
        return _report(args.directory)
    try:
        cfg = load_config(args.config, args.seed)
        if args.command != "validate" and cfg.kind != args.command:
            raise ConfigurationError(f"[experiment] kind is {cfg.kind!r} but the subcommand is {args.command!r}")
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"ok: {cfg.kind} {cfg.config_hash}")
        return EXIT_OK
    if args.workers is not None:
        if args.workers < 1:
            print("error: --workers must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        cfg = replace(cfg, workers=args.workers)
    outdir = cfg.output_dir(args.out)
    log.info("running %s into %s", cfg.kind, outdir)
    try:
        result = run_experiment(cfg, outdir)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    persist(result, cfg, outdir)
    sys.stdout.write(format_summary(result))
    print(f"output = {outdir}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
