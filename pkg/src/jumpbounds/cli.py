"""Command-line interface.

Subcommands: run, sweep, classical-check, steady-state, validate.  Errors
surface as one JSON object on stderr and a nonzero exit status.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .errors import JumpBoundsError
from . import runner


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="path to a YAML/JSON run configuration")
    p.add_argument("--out", default=None, help="output directory (default: config, then $JUMPBOUNDS_OUTPUT_DIR)")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--trajectories", type=int, default=None, help="override trajectory count")
    p.add_argument("--tau", type=float, default=None, help="override total time")
    p.add_argument("--workers", type=int, default=None, help="worker threads (default: logical cores)")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="stdout summary format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jumpbounds",
        description="Trajectory sampling and precision-bound reports for monitored open quantum systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "single ensemble run; writes summary.json and samples.csv"),
        ("sweep", "one run per sweep value; writes sweep.csv"),
        ("classical-check", "Fisher diagonality audit for classical models"),
        ("steady-state", "print the steady state and pair asymmetries"),
        ("validate", "model lint; nonzero exit on hard violations"),
    ):
        _add_common(sub.add_parser(name, help=help_text))
    return parser


def _apply_overrides(cfg: runner.RunConfig, args) -> runner.RunConfig:
    updates = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.trajectories is not None:
        updates["trajectories"] = args.trajectories
    if args.tau is not None:
        updates["tau"] = args.tau
    if args.workers is not None:
        updates["workers"] = args.workers
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _emit(payload: dict, fmt: str):
    if fmt == "csv":
        keys = sorted(payload)
        print(",".join(keys))
        print(",".join(str(payload[k]) for k in keys))
    else:
        print(json.dumps(payload, indent=2, sort_keys=True, default=str))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(runner.load_config(args.config), args)
        if args.command == "run":
            out_dir = runner.resolve_output_dir(cfg, args.out)
            result = runner.run_experiment(cfg)
            summary = runner.write_run_artifacts(result, out_dir)
            _emit(summary, args.format)
            return 0
        if args.command == "sweep":
            out_dir = runner.resolve_output_dir(cfg, args.out)
            summaries = runner.run_sweep(cfg, out_dir)
            _emit({"rows": len(summaries), "output": str(out_dir / "sweep.csv")}, args.format)
            return 0
        if args.command == "classical-check":
            out_dir = runner.resolve_output_dir(cfg, args.out)
            report = runner.classical_check(cfg)
            (out_dir / "classical_check.json").write_text(
                json.dumps(report, indent=2, sort_keys=True) + "\n"
            )
            _emit(report, args.format)
            return 0 if report["passed"] else 1
        if args.command == "steady-state":
            _emit(runner.steady_state_report(cfg), args.format)
            return 0
        if args.command == "validate":
            report = runner.validation_report(cfg)
            _emit(report, args.format)
            return 0 if report["ok"] else 1
    except JumpBoundsError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
