"""
Command-line runner::

    qsdw run CONFIG [--output-dir DIR] [--seed S] [--quiet]

Writes ``timeseries.csv`` (plus one CSV per additional table),
``summary.json`` and ``resolved_config.json`` into the output directory.

Exit codes: 0 all invariants pass, 1 configuration or IO error, 2 a physics
invariant failed, 3 numerical failure (non-convergence, overflow or a
failed internal consistency check).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config, resolved_dict
from .experiments import Table, run_experiment
from .parallel import thread_count

__all__ = ["main", "run", "write_csv", "write_summary", "EXIT_OK", "EXIT_CONFIG",
           "EXIT_PHYSICS", "EXIT_NUMERICAL"]

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_NUMERICAL = 0, 1, 2, 3


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(table, path):
    """Write ``table`` with 17 significant digits and ``\\n`` line endings.

    An empty table produces a header-only file.
    """
    if not isinstance(table, Table):
        table = Table(*table)
    rows = np.asarray(table.rows, dtype=float).reshape(-1, len(table.columns))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.columns)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def write_summary(result, path, wall_clock=None, extra=None):
    """JSON summary: provenance, fits, every check and the failed ones by name."""
    doc = {
        "experiment": result.experiment,
        "config_hash": result.provenance.get("config_hash"),
        "seed": result.provenance.get("seed"),
        "provenance": result.provenance,
        "fits": result.fits,
        "checks": [{"name": c.name, "passed": c.passed, "measured": c.measured,
                    "threshold": c.threshold, "kind": c.kind, "detail": c.detail}
                   for c in result.checks],
        "failed": [c.name for c in result.failed],
        "info": result.info,
        "wall_clock_s": wall_clock,
    }
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _exit_code(result):
    failed = result.failed
    if any(c.kind == "numerical" for c in failed):
        return EXIT_NUMERICAL
    if failed:
        return EXIT_PHYSICS
    return EXIT_OK


def run(config_path, output_dir="qsdw_output", seed=None, quiet=False):
    """Run one config end to end and return the exit code."""
    def say(msg):
        if not quiet:
            print(msg)

    def err(msg):
        print(f"qsdw run: {msg}", file=sys.stderr)

    try:
        thread_count()
        config = load_config(config_path, seed)
        resolved = resolved_dict(config)
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "resolved_config.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(resolved, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except ConfigError as exc:
        err(f"configuration error: {exc}")
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        err(f"configuration error: {exc}")
        return EXIT_CONFIG

    start = time.perf_counter()
    try:
        result = run_experiment(config)
    except ArithmeticError as exc:
        # NumericalFailure and numpy overflow both land here
        err(f"numerical failure in {config.experiment}: {exc}")
        try:
            (out / "summary.json").write_text(json.dumps(
                {"experiment": config.experiment, "config_hash": config.config_hash(),
                 "error": str(exc), "exit_code": EXIT_NUMERICAL}, indent=2, sort_keys=True)
                + "\n", encoding="utf-8")
        except OSError:
            pass
        return EXIT_NUMERICAL
    elapsed = time.perf_counter() - start

    code = _exit_code(result)
    try:
        tables = dict(result.tables)
        primary = tables.pop("timeseries", None)
        if primary is None and tables:
            primary = tables.pop(next(iter(tables)))
        write_csv(primary if primary is not None else Table.empty(("t",)),
                  out / "timeseries.csv")
        for name, table in tables.items():
            write_csv(table, out / f"{name}.csv")
        write_summary(result, out / "summary.json", elapsed, {"exit_code": code})
    except OSError as exc:
        err(f"cannot write outputs to {out}: {exc}")
        return EXIT_CONFIG

    for c in result.checks:
        say(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  measured={c.measured:.6g} "
            f"threshold={c.threshold:.6g} ({c.kind})")
    if code == EXIT_NUMERICAL:
        names = ", ".join(c.name for c in result.failed if c.kind == "numerical")
        err(f"numerical invariant failed: {names}")
    elif code == EXIT_PHYSICS:
        err(f"physics invariant failed: {', '.join(c.name for c in result.failed)}")
    say(f"wrote {out}")
    return code


def build_parser():
    parser = argparse.ArgumentParser(prog="qsdw",
                                     description="Strongly damped wave experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", help="TOML (or resolved JSON) experiment config")
    p_run.add_argument("--output-dir", default="qsdw_output",
                       help="directory for CSV and summary files (default: %(default)s)")
    p_run.add_argument("--seed", type=int, default=None, help="override initial.seed")
    p_run.add_argument("--quiet", action="store_true", help="only report errors")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return run(args.config, args.output_dir, args.seed, args.quiet)
    except ValueError as exc:
        # bad QSDW_THREADS and similar environment problems
        print(f"qsdw run: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
