"""Command line runner for the verification experiments.

`regdens list` prints the registry; `regdens run --experiment NAME` executes
one experiment and writes a timestamped run directory with the echoed
config, a result.json, CSV tables, and rendered figures.  result.json holds
no timestamps or wall times, so reruns with the same (config, seed) are
byte-identical regardless of --workers; figures are exempt.

Exit codes: 0 verdict PASS, 2 verdict FAIL or INCONCLUSIVE, 1 usage or
runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .experiments import EXPERIMENTS, ConfigError, RunSink, run_experiment

SCHEMA_VERSION = 1


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for FAIL verdicts
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def _dump(path: Path, payload: dict):
    path.write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=2)
                    + "\n")


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as ex:
        raise ConfigError(f"cannot read config {path}: {ex}") from ex
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as ex:
        raise ConfigError(f"config {path} is not valid JSON: {ex.msg} "
                          f"at line {ex.lineno}, column {ex.colno}") from ex
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must hold a JSON object, got "
                          f"{type(cfg).__name__}")
    return cfg


def _run_dir(base: Path, experiment: str) -> Path:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    root = base / experiment
    root.mkdir(parents=True, exist_ok=True)
    path = root / stamp
    suffix = 0
    while path.exists():
        suffix += 1
        path = root / f"{stamp}-{suffix}"
    path.mkdir()
    return path


def _cmd_list() -> int:
    width = max(len(name) for name in EXPERIMENTS)
    for name in sorted(EXPERIMENTS):
        exp = EXPERIMENTS[name]
        print(f"{name:<{width}}  {exp.description}  [{exp.anchor}]")
    return 0


def _cmd_run(args) -> int:
    name = args.experiment
    if name not in EXPERIMENTS:
        valid = ", ".join(sorted(EXPERIMENTS))
        print(f"unknown experiment {name!r}; valid experiments: {valid}",
              file=sys.stderr)
        return 1
    if not 0 <= args.seed < 2 ** 64:
        print("--seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return 1
    if args.workers < 1:
        print("--workers must be >= 1", file=sys.stderr)
        return 1
    try:
        user_params = _load_config(args.config) if args.config else None
        outbase = Path(args.out or os.environ.get("TOOL_OUT") or "runs")
        rundir = _run_dir(outbase, name)
        sink = RunSink(rundir)
        t0 = time.monotonic()
        verdict, merged, metrics = run_experiment(name, user_params,
                                                  args.seed, args.workers,
                                                  sink)
        elapsed = time.monotonic() - t0
    except ConfigError as ex:
        print(f"config error: {ex}", file=sys.stderr)
        return 1
    _dump(rundir / "config.json",
          {"experiment": name, "params": merged, "seed": args.seed,
           "workers": args.workers})
    _dump(rundir / "result.json",
          {"schema_version": SCHEMA_VERSION, "experiment": name,
           "verdict": verdict, "metrics": metrics,
           "artifacts": sorted(sink.artifacts)})
    (outbase / name / "latest").write_text(rundir.name + "\n")
    print(f"{name}: {verdict} ({elapsed:.1f}s) -> {rundir}")
    return 0 if verdict == "PASS" else 2


def main(argv=None) -> int:
    parser = _Parser(prog="regdens",
                     description="verification experiments for the "
                                 "regularity toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list available experiments")
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--experiment", required=True,
                     help="experiment name (see `regdens list`)")
    run.add_argument("--config", default=None,
                     help="JSON file with parameter overrides")
    run.add_argument("--seed", type=int, default=0,
                     help="unsigned 64-bit seed (default 0)")
    run.add_argument("--workers", type=int, default=1,
                     help="worker processes (default 1)")
    run.add_argument("--out", default=None,
                     help="output root (default $TOOL_OUT or ./runs)")
    args = parser.parse_args(argv)
    if args.command == "list":
        return _cmd_list()
    return _cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
