"""CSV report emission from persisted run directories.

CSVs are the plotting interface; figures are rendered by external tools.
All floats are serialized with 6 significant digits and row ordering is
a pure function of the input artifacts, so re-emission is byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .analysis import (
    layer_sparsity_report,
    mask_overlap,
    sign_flip_report,
    survival_ratio,
    weight_range_stats,
)
from .errors import ReportError
from .persistence import (
    load_init_params,
    load_manifest,
    load_rewind_params,
    load_round_mask,
    load_round_trained,
)

__all__ = ["emit_reports", "emit_overlap_csv", "emit_stability_csv", "RunHandle", "load_runs"]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _write_csv(path: Path, header, rows) -> Path:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@dataclass
class RunHandle:
    """A loaded run directory with its identifying config fields."""

    path: Path
    manifest: dict

    @property
    def metric(self) -> str:
        return self.manifest["config"]["metric"]

    @property
    def seed(self) -> int:
        return self.manifest["config"]["seed"]

    @property
    def run_id(self) -> str:
        return f"{self.metric}:{self.seed}"

    @property
    def round_indices(self) -> list:
        return [entry["round"] for entry in self.manifest["rounds"]]

    @property
    def is_partial_reinit(self) -> bool:
        return self.manifest.get("partial_reinit") is not None


def load_runs(run_dirs) -> list:
    """Load and order run directories; ordering is (metric, seed, dirname)."""
    handles = []
    for d in run_dirs:
        try:
            handles.append(RunHandle(path=Path(d), manifest=load_manifest(d)))
        except FileNotFoundError as exc:
            raise ReportError(str(exc)) from exc
    handles.sort(key=lambda h: (h.metric, h.seed, h.path.name))
    return handles


def _accuracy_rows(runs) -> list:
    rows = []
    for run in runs:
        for entry in run.manifest["rounds"]:
            rows.append(
                (entry["round"], entry["sparsity"], run.metric, run.seed, entry["accuracy"])
            )
    return rows


def _layer_sparsity_rows(runs) -> list:
    rows = []
    for run in runs:
        masks = [load_round_mask(run.path, r) for r in run.round_indices]
        report = layer_sparsity_report(masks)
        for entry in report.rounds:
            for li, frac in enumerate(entry["per_layer"]):
                rows.append((run.metric, run.seed, entry["round"], li, frac))
            rows.append((run.metric, run.seed, entry["round"], "global", entry["global"]))
    return rows


def _weight_range_rows(runs) -> list:
    rows = []
    for run in runs:
        snapshots = [("init", load_init_params(run.path), None),
                     ("rewind", load_rewind_params(run.path), None)]
        for r in run.round_indices:
            snapshots.append(
                (f"round_{r:03d}_trained", load_round_trained(run.path, r), load_round_mask(run.path, r))
            )
        for name, params, mask in snapshots:
            for li, (lo, hi) in enumerate(weight_range_stats(params, mask)):
                rows.append((run.metric, run.seed, name, li, lo, hi))
    return rows


def _overlap_rows(runs, round_index: int) -> list:
    masks = [load_round_mask(run.path, round_index) for run in runs]
    report = mask_overlap(masks)
    run_ids = "|".join(run.run_id for run in runs)
    rows = []
    for entry in report.per_layer:
        rows.append(
            (
                run_ids,
                round_index,
                entry["layer"],
                entry["total"],
                entry["intersection"],
                entry["fraction_of_total"],
                entry["fraction_of_mean_unpruned"],
            )
        )
    rows.append(
        (
            run_ids,
            round_index,
            "global",
            report.total_connections,
            report.intersection_size,
            report.fraction_of_total,
            report.fraction_of_mean_unpruned,
        )
    )
    return rows


_OVERLAP_HEADER = (
    "runs",
    "round",
    "layer",
    "total",
    "intersection",
    "fraction_of_total",
    "fraction_of_mean_unpruned",
)

_STABILITY_HEADER = (
    "metric",
    "seed",
    "round",
    "group",
    "connections",
    "mean_std",
    "flipped",
    "flipped_fraction",
    "mean_transitions",
)


def _stability_rows(runs, round_index: int) -> list:
    masks_per_run = [[load_round_mask(run.path, r) for r in range(round_index + 1)] for run in runs]
    overlap = mask_overlap([masks[round_index] for masks in masks_per_run]).intersection
    rows = []
    for run, masks in zip(runs, masks_per_run):
        snapshots = [load_round_trained(run.path, r) for r in range(round_index + 1)]
        report = sign_flip_report(snapshots, masks, overlap)
        for group in ("overlapping", "non_overlapping"):
            g = report.groups[group]
            rows.append(
                (
                    run.metric,
                    run.seed,
                    round_index,
                    group,
                    g["connections"],
                    g["mean_std"],
                    g["flipped"],
                    g["flipped_fraction"],
                    g["mean_transitions"],
                )
            )
    return rows


def emit_overlap_csv(run_dirs, round_index: int, out_dir) -> Path:
    """Write overlap.csv for the given runs at one round."""
    runs = load_runs(run_dirs)
    if len(runs) < 2:
        raise ReportError("overlap analysis needs at least two run directories")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        rows = _overlap_rows(runs, round_index)
    except KeyError as exc:
        raise ReportError(f"round {round_index} missing from a run manifest: {exc}") from exc
    return _write_csv(out_dir / "overlap.csv", _OVERLAP_HEADER, rows)


def emit_stability_csv(run_dirs, round_index: int, out_dir) -> Path:
    """Write stability.csv (group summaries) for the given runs at one round."""
    runs = load_runs(run_dirs)
    if len(runs) < 2:
        raise ReportError("stability analysis needs at least two run directories")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        rows = _stability_rows(runs, round_index)
    except KeyError as exc:
        raise ReportError(f"round {round_index} missing from a run manifest: {exc}") from exc
    return _write_csv(out_dir / "stability.csv", _STABILITY_HEADER, rows)


def _survival_rows(runs) -> list:
    rows = []
    for run in runs:
        if not run.is_partial_reinit:
            continue
        prov = run.manifest["partial_reinit"]
        overlap_dirs = prov["overlap_from"]
        round_index = prov["overlap_round"]
        try:
            overlap = mask_overlap(
                [load_round_mask(d, round_index) for d in overlap_dirs]
            ).intersection
            reinit_mask = load_round_mask(run.path, round_index)
        except (FileNotFoundError, KeyError) as exc:
            raise ReportError(
                f"survival report for {run.path} needs round {round_index} artifacts: {exc}"
            ) from exc
        for entry in survival_ratio(reinit_mask, overlap):
            rows.append(
                (
                    run.metric,
                    run.seed,
                    round_index,
                    entry["layer"],
                    entry["observed"],
                    entry["expected"],
                    entry["relative_increase"] * 100.0,
                    entry["flagged"],
                )
            )
    return rows


def emit_reports(run_dirs, out_dir) -> dict:
    """Write the full CSV report set for the given runs into ``out_dir``.

    accuracy.csv, layer_sparsity.csv and weight_ranges.csv cover every run.
    overlap.csv and stability.csv compare the non-reinitialized runs at the
    highest round they all completed (header-only when fewer than two runs
    qualify). survival.csv covers partially-reinitialized runs.
    """
    runs = load_runs(run_dirs)
    if not runs:
        raise ReportError("no run directories given")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    files = {}
    files["accuracy"] = _write_csv(
        out_dir / "accuracy.csv",
        ("round", "sparsity", "metric", "seed", "accuracy"),
        _accuracy_rows(runs),
    )
    files["layer_sparsity"] = _write_csv(
        out_dir / "layer_sparsity.csv",
        ("metric", "seed", "round", "layer", "unpruned_fraction"),
        _layer_sparsity_rows(runs),
    )
    files["weight_ranges"] = _write_csv(
        out_dir / "weight_ranges.csv",
        ("metric", "seed", "snapshot", "layer", "min", "max"),
        _weight_range_rows(runs),
    )

    comparable = [run for run in runs if not run.is_partial_reinit]
    overlap_rows = []
    stability_rows = []
    if len(comparable) >= 2:
        common_round = min(max(run.round_indices) for run in comparable)
        overlap_rows = _overlap_rows(comparable, common_round)
        stability_rows = _stability_rows(comparable, common_round)
    files["overlap"] = _write_csv(out_dir / "overlap.csv", _OVERLAP_HEADER, overlap_rows)
    files["stability"] = _write_csv(out_dir / "stability.csv", _STABILITY_HEADER, stability_rows)

    files["survival"] = _write_csv(
        out_dir / "survival.csv",
        ("metric", "seed", "round", "layer", "observed", "expected", "relative_increase_pct", "flagged"),
        _survival_rows(runs),
    )
    return files
