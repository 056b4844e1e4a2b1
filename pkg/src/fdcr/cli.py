"""Command-line entry point: ``fdcr run <config>`` and ``fdcr validate <config>``.

Exit status: 0 on success, 2 for an invalid configuration, 3 when an
optimisation has no feasible point, 1 for any other failure.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
import traceback
from typing import List, Optional

import numpy as np
import scipy

from fdcr import __version__
from fdcr.config import PRESETS, SchemaError, describe, load
from fdcr.exceptions import ConfigurationError, InfeasibleError
from fdcr.experiments import CSV_SCHEMA_VERSION, InfeasibleWithTables, render_csv, run_experiment
from fdcr.sim import RNG_ALGORITHM

EXIT_OK = 0
EXIT_CRASH = 1
EXIT_SCHEMA = 2
EXIT_INFEASIBLE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdcr", description="Full-duplex cognitive radio sensing/throughput experiments."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="TOML experiment configuration")
        p.add_argument("--preset", choices=sorted(PRESETS), help="defaults merged under the config")
        p.add_argument("--seed", type=int, help="override the configured seed")

    run = sub.add_parser("run", help="run the configured experiment")
    common(run)
    run.add_argument("--out-dir", help="output directory (default: config output_dir or ./results)")
    validate = sub.add_parser("validate", help="check a configuration without running it")
    common(validate)
    return parser


def _load(args):
    config = load(args.config, args.preset)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise SchemaError([f"--seed: expected an integer in [0, 2^64), got {args.seed}"])
        config.seed = args.seed
    return config


def _write_outputs(out_dir, config, tables, summary, started, status):
    os.makedirs(out_dir, exist_ok=True)
    files = []
    for table in tables:
        path = os.path.join(out_dir, f"{table.name}.csv")
        with open(path, "w", newline="", encoding="utf-8") as handle:
            handle.write(render_csv(table))
        files.append(os.path.basename(path))
    metadata = {
        "experiment": config.experiment,
        "status": status,
        "seed": config.seed,
        "rng": RNG_ALGORITHM,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "files": files,
        "config": config.raw,
        "resolved": describe(config),
        "summary": summary,
        "versions": {
            "fdcr": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_time_seconds": time.perf_counter() - started,
    }
    with open(os.path.join(out_dir, "metadata.json"), "w", encoding="utf-8") as handle:
        json.dump(metadata, handle, indent=2, sort_keys=True, default=_json_default)
        handle.write("\n")
    return files


def _json_default(value):
    if isinstance(value, (np.generic,)):
        return value.item()
    if isinstance(value, tuple):
        return list(value)
    return str(value)


def cmd_run(args) -> int:
    started = time.perf_counter()
    config = _load(args)
    out_dir = args.out_dir or config.output_dir or "results"
    try:
        tables, summary = run_experiment(config)
    except InfeasibleWithTables as exc:
        _write_outputs(out_dir, config, exc.tables, exc.summary, started, "infeasible")
        raise
    files = _write_outputs(out_dir, config, tables, summary, started, "ok")
    print(f"{config.experiment}: wrote {', '.join(files)} and metadata.json to {out_dir}")
    for key, value in summary.items():
        print(f"  {key} = {value}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        config = _load(args)
    except SchemaError as exc:
        json.dump({"errors": exc.errors}, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return EXIT_SCHEMA
    report = {"errors": [], **describe(config)}
    json.dump(report, sys.stdout, indent=2, sort_keys=True, default=_json_default)
    sys.stdout.write("\n")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = cmd_run if args.command == "run" else cmd_validate
    try:
        return handler(args)
    except SchemaError as exc:
        for error in exc.errors:
            print(f"fdcr: config error: {error}", file=sys.stderr)
        return EXIT_SCHEMA
    except InfeasibleError as exc:
        print(f"fdcr: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConfigurationError as exc:
        print(f"fdcr: config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except Exception:  # noqa: BLE001 - report and map to the crash status
        traceback.print_exc()
        return EXIT_CRASH


if __name__ == "__main__":
    sys.exit(main())
