"""Command-line surface.

Subcommands:
    run            execute one pruning run from a JSON config
    analyze        overlap / stability CSVs for persisted runs at a round
    partial-reinit rerun a base config from a partially reinitialized start
    report         emit the full CSV report set for a group of runs

The MNIST directory comes from --data-dir or the LTHLAB_DATA_DIR
environment variable and must hold the four canonical IDX files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import FormatError, ReportError
from .ltr import RunConfig, ltr_run, partial_reinit_run
from .metrics import METRIC_NAMES
from .mnist import load_dataset
from .reports import emit_overlap_csv, emit_reports, emit_stability_csv

CI_EPOCHS_PER_ROUND = 3
CI_ROUNDS = 6


def _resolve_data_dir(arg: str | None) -> Path:
    data_dir = arg or os.environ.get("LTHLAB_DATA_DIR")
    if not data_dir:
        raise SystemExit(
            "error: no dataset location; pass --data-dir or set LTHLAB_DATA_DIR"
        )
    path = Path(data_dir)
    if not path.is_dir():
        raise SystemExit(f"error: data directory {path} does not exist")
    return path


def _load_splits(data_dir: Path):
    return load_dataset(data_dir, "train"), load_dataset(data_dir, "test")


def _read_config_file(path: str) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SystemExit(f"error: config file {path} not found")
    except json.JSONDecodeError as exc:
        raise SystemExit(f"error: config file {path} is not valid JSON: {exc}")
    if not isinstance(payload, dict):
        raise SystemExit(f"error: config file {path} must hold a JSON object")
    return payload


def _build_config(args) -> RunConfig:
    payload = _read_config_file(args.config)
    known = set(RunConfig.__dataclass_fields__)
    unknown = sorted(set(payload) - known)
    if unknown:
        raise SystemExit(f"error: unknown config keys: {', '.join(unknown)}")
    payload["metric"] = args.metric
    payload["seed"] = args.seed
    payload["out_dir"] = args.out
    if args.halt_on_collapse:
        payload["halt_on_collapse"] = True
    if args.ci:
        payload["epochs_per_round"] = CI_EPOCHS_PER_ROUND
        payload["rounds"] = CI_ROUNDS
    try:
        config = RunConfig.from_manifest_dict(payload)
        config.validate()
    except (TypeError, ValueError) as exc:
        raise SystemExit(f"error: bad run configuration: {exc}")
    return config


def _cmd_run(args) -> int:
    config = _build_config(args)
    train_ds, test_ds = _load_splits(_resolve_data_dir(args.data_dir))
    records = ltr_run(config, train_ds, test_ds, log=lambda msg: print(msg, flush=True))
    final = records[-1]
    print(
        f"done: {len(records)} rounds, final sparsity {final.sparsity:.4%}, "
        f"final accuracy {final.accuracy:.4f}"
    )
    return 0


def _cmd_analyze(args) -> int:
    if args.what == "overlap":
        path = emit_overlap_csv(args.runs, args.round, args.out)
    else:
        path = emit_stability_csv(args.runs, args.round, args.out)
    print(f"wrote {path}")
    return 0


def _cmd_partial_reinit(args) -> int:
    train_ds, test_ds = _load_splits(_resolve_data_dir(args.data_dir))
    records = partial_reinit_run(
        args.base_run,
        args.overlap_from,
        args.round,
        args.seed,
        args.out,
        train_ds,
        test_ds,
        log=lambda msg: print(msg, flush=True),
    )
    final = records[-1]
    print(
        f"done: {len(records)} rounds, final sparsity {final.sparsity:.4%}, "
        f"final accuracy {final.accuracy:.4f}"
    )
    return 0


def _cmd_report(args) -> int:
    files = emit_reports(args.runs, args.out)
    for name in sorted(files):
        print(f"wrote {files[name]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lthlab",
        description="Deterministic iterative pruning runs and ticket analyses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one pruning run")
    p_run.add_argument("--config", required=True, help="JSON file with RunConfig fields")
    p_run.add_argument("--metric", required=True, choices=METRIC_NAMES)
    p_run.add_argument("--seed", required=True, type=int)
    p_run.add_argument("--out", required=True, help="run output directory")
    p_run.add_argument("--data-dir", default=None, help="MNIST IDX directory (or LTHLAB_DATA_DIR)")
    p_run.add_argument("--ci", action="store_true",
                       help=f"reduced schedule: {CI_EPOCHS_PER_ROUND} epochs/round, {CI_ROUNDS} rounds")
    p_run.add_argument("--halt-on-collapse", action="store_true",
                       help="stop the run when a layer loses all connections")
    p_run.set_defaults(func=_cmd_run)

    p_an = sub.add_parser("analyze", help="cross-run analyses at a fixed round")
    an_sub = p_an.add_subparsers(dest="what", required=True)
    for what in ("overlap", "stability"):
        p = an_sub.add_parser(what)
        p.add_argument("--runs", nargs="+", required=True, help="run directories")
        p.add_argument("--round", type=int, required=True)
        p.add_argument("--out", required=True)
        p.set_defaults(func=_cmd_analyze, what=what)

    p_pr = sub.add_parser("partial-reinit",
                          help="rerun a base config from a partially reinitialized start")
    p_pr.add_argument("--base-run", required=True)
    p_pr.add_argument("--overlap-from", nargs="+", required=True)
    p_pr.add_argument("--round", type=int, required=True)
    p_pr.add_argument("--seed", type=int, required=True, help="seed for the reinitialization draw")
    p_pr.add_argument("--out", required=True)
    p_pr.add_argument("--data-dir", default=None)
    p_pr.set_defaults(func=_cmd_partial_reinit)

    p_rep = sub.add_parser("report", help="emit the CSV report set")
    p_rep.add_argument("--runs", nargs="+", required=True)
    p_rep.add_argument("--out", required=True)
    p_rep.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 1
    except (FormatError, ReportError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
