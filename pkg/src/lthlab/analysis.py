"""Structural analyses across runs: mask overlap, per-connection stability,
sign flips, layer sparsity evolution, weight ranges, and reinitialization
survival.

Conventions: standard deviations are population (divide by N) over the
rounds in which a connection was unpruned, and the sign of an exact zero
is grouped with positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pruning import PruneMask

__all__ = [
    "OverlapReport",
    "StabilityReport",
    "SparsityReport",
    "mask_overlap",
    "stddev_trajectories",
    "sign_flip_report",
    "layer_sparsity_report",
    "weight_range_stats",
    "survival_ratio",
]


@dataclass
class OverlapReport:
    """Connections unpruned in every one of several same-shape masks."""

    num_runs: int
    intersection: list            # per-layer uint8 arrays
    per_layer: list               # per-layer summary dicts
    total_connections: int
    unpruned_per_run: list
    intersection_size: int
    fraction_of_total: float
    fraction_of_mean_unpruned: float


def mask_overlap(masks) -> OverlapReport:
    """Intersect >= 2 masks of identical shapes."""
    if len(masks) < 2:
        raise ValueError(f"need at least 2 masks, got {len(masks)}")
    shapes = [tuple(m.shape for m in mask.layers) for mask in masks]
    if any(s != shapes[0] for s in shapes[1:]):
        raise ValueError("masks have mismatched layer shapes")

    num_layers = masks[0].num_layers
    intersection = []
    per_layer = []
    for li in range(num_layers):
        inter = np.ones_like(masks[0].layers[li])
        for mask in masks:
            inter &= mask.layers[li]
        intersection.append(inter)
        total = int(inter.size)
        unpruned = [int(mask.layers[li].sum()) for mask in masks]
        inter_n = int(inter.sum())
        mean_unpruned = float(np.mean(unpruned))
        per_layer.append(
            {
                "layer": li,
                "total": total,
                "unpruned_per_run": unpruned,
                "intersection": inter_n,
                "fraction_of_total": inter_n / total,
                "fraction_of_mean_unpruned": inter_n / mean_unpruned if mean_unpruned else 0.0,
            }
        )
    total = sum(p["total"] for p in per_layer)
    unpruned_per_run = [int(sum(mask.layers[li].sum() for li in range(num_layers))) for mask in masks]
    inter_size = sum(p["intersection"] for p in per_layer)
    mean_unpruned = float(np.mean(unpruned_per_run))
    return OverlapReport(
        num_runs=len(masks),
        intersection=intersection,
        per_layer=per_layer,
        total_connections=total,
        unpruned_per_run=unpruned_per_run,
        intersection_size=inter_size,
        fraction_of_total=inter_size / total,
        fraction_of_mean_unpruned=inter_size / mean_unpruned if mean_unpruned else 0.0,
    )


def _check_trajectory_args(snapshots, masks) -> None:
    if len(snapshots) != len(masks):
        raise ValueError("need one mask per snapshot round")
    if not snapshots:
        raise ValueError("need at least one round")
    for params, mask in zip(snapshots, masks):
        for li, (w, m) in enumerate(zip(params.weights, mask.layers)):
            if w.shape != m.shape:
                raise ValueError(f"layer {li}: mask shape {m.shape} != weight shape {w.shape}")


def stddev_trajectories(snapshots, masks) -> list:
    """Per-connection population std of trained values over unpruned rounds.

    Returns one float64 array per layer; connections that were never
    unpruned hold NaN. A single observation gives std 0.
    """
    _check_trajectory_args(snapshots, masks)
    num_layers = snapshots[0].num_layers
    out = []
    for li in range(num_layers):
        shape = snapshots[0].weights[li].shape
        count = np.zeros(shape, dtype=np.float64)
        total = np.zeros(shape, dtype=np.float64)
        total_sq = np.zeros(shape, dtype=np.float64)
        for params, mask in zip(snapshots, masks):
            alive = mask.layers[li] != 0
            w = params.weights[li].astype(np.float64)
            count += alive
            total += np.where(alive, w, 0.0)
            total_sq += np.where(alive, w * w, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = total / count
            var = np.maximum(total_sq / count - mean * mean, 0.0)
            std = np.sqrt(var)
        std[count == 0] = np.nan
        out.append(std)
    return out


@dataclass
class StabilityReport:
    """Per-connection trajectory statistics plus overlap-group summaries.

    ``flipped`` marks connections whose trajectory contains both signs;
    ``transitions`` counts consecutive-round sign changes (an auxiliary
    statistic, not the flip definition). Group summaries cover connections
    unpruned at the final round only.
    """

    rounds: int
    std: list = field(default_factory=list)
    flipped: list = field(default_factory=list)
    transitions: list = field(default_factory=list)
    overlap_member: list = field(default_factory=list)
    survivor: list = field(default_factory=list)
    groups: dict = field(default_factory=dict)


def _group_summary(std, flipped, transitions, selector, hist_edges) -> dict:
    n = int(selector.sum())
    if n == 0:
        return {
            "connections": 0,
            "mean_std": float("nan"),
            "flipped": 0,
            "flipped_fraction": float("nan"),
            "mean_transitions": float("nan"),
            "std_histogram": {"edges": hist_edges.tolist(), "counts": [0] * (len(hist_edges) - 1)},
        }
    counts, _ = np.histogram(std[selector], bins=hist_edges)
    return {
        "connections": n,
        "mean_std": float(std[selector].mean()),
        "flipped": int(flipped[selector].sum()),
        "flipped_fraction": float(flipped[selector].mean()),
        "mean_transitions": float(transitions[selector].mean()),
        "std_histogram": {"edges": hist_edges.tolist(), "counts": counts.tolist()},
    }


def sign_flip_report(snapshots, masks, overlap_masks) -> StabilityReport:
    """Full stability report: stds, sign flips, and overlap-group summaries.

    ``overlap_masks`` holds per-layer 0/1 membership arrays (typically the
    intersection from :func:`mask_overlap`).
    """
    _check_trajectory_args(snapshots, masks)
    num_layers = snapshots[0].num_layers
    if len(overlap_masks) != num_layers:
        raise ValueError("overlap_masks layer count mismatch")

    report = StabilityReport(rounds=len(snapshots))
    report.std = stddev_trajectories(snapshots, masks)
    all_std, all_flip, all_trans, all_member, all_surv = [], [], [], [], []
    for li in range(num_layers):
        shape = snapshots[0].weights[li].shape
        has_pos = np.zeros(shape, dtype=bool)
        has_neg = np.zeros(shape, dtype=bool)
        seen = np.zeros(shape, dtype=bool)
        prev_pos = np.zeros(shape, dtype=bool)
        transitions = np.zeros(shape, dtype=np.int32)
        for params, mask in zip(snapshots, masks):
            alive = mask.layers[li] != 0
            pos = params.weights[li] >= 0  # sign(0) counts as positive
            has_pos |= alive & pos
            has_neg |= alive & ~pos
            transitions += (alive & seen & (pos != prev_pos)).astype(np.int32)
            prev_pos = np.where(alive, pos, prev_pos)
            seen |= alive
        flipped = has_pos & has_neg
        member = np.asarray(overlap_masks[li]) != 0
        survivor = masks[-1].layers[li] != 0
        report.flipped.append(flipped)
        report.transitions.append(transitions)
        report.overlap_member.append(member)
        report.survivor.append(survivor)
        all_std.append(report.std[li].reshape(-1))
        all_flip.append(flipped.reshape(-1))
        all_trans.append(transitions.reshape(-1))
        all_member.append(member.reshape(-1))
        all_surv.append(survivor.reshape(-1))

    std = np.concatenate(all_std)
    flipped = np.concatenate(all_flip)
    transitions = np.concatenate(all_trans)
    member = np.concatenate(all_member)
    survivor = np.concatenate(all_surv)
    # Shared histogram bins over the surviving connections' std range.
    survivor_std = std[survivor]
    top = float(survivor_std.max()) if survivor_std.size else 1.0
    hist_edges = np.linspace(0.0, top if top > 0 else 1.0, 21)
    report.groups = {
        "overlapping": _group_summary(std, flipped, transitions, survivor & member, hist_edges),
        "non_overlapping": _group_summary(std, flipped, transitions, survivor & ~member, hist_edges),
    }
    return report


@dataclass
class SparsityReport:
    """Per-round, per-layer unpruned fractions."""

    rounds: list
    num_layers: int


def layer_sparsity_report(masks) -> SparsityReport:
    """Unpruned fraction per layer and globally, in round order."""
    rounds = []
    num_layers = masks[0].num_layers if masks else 0
    for mask in masks:
        unpruned = mask.unpruned_counts()
        totals = mask.total_counts()
        rounds.append(
            {
                "round": mask.round_index,
                "per_layer": [u / t for u, t in zip(unpruned, totals)],
                "global": sum(unpruned) / sum(totals),
            }
        )
    return SparsityReport(rounds=rounds, num_layers=num_layers)


def weight_range_stats(params, mask: PruneMask | None = None) -> list:
    """Exact per-layer (min, max); restricted to unpruned entries if a mask
    is supplied. A layer with nothing unpruned reports (0.0, 0.0)."""
    out = []
    for li, w in enumerate(params.weights):
        if mask is not None:
            alive = mask.layers[li] != 0
            vals = w[alive]
        else:
            vals = w.reshape(-1)
        if vals.size == 0:
            out.append((0.0, 0.0))
        else:
            out.append((float(vals.min()), float(vals.max())))
    return out


def survival_ratio(reinit_mask: PruneMask, overlap_masks) -> list:
    """How much of an overlap set survived a reinitialized run, per layer.

    observed  = overlap connections unpruned in the reinitialized mask
    expected  = overlap size * layer unpruned fraction (uniform-chance model)
    relative_increase = observed / expected - 1

    A layer with expected 0 but observed > 0 reports an infinite increase
    and is flagged.
    """
    if len(overlap_masks) != reinit_mask.num_layers:
        raise ValueError("overlap_masks layer count mismatch")
    if not any(int(np.asarray(o).sum()) for o in overlap_masks):
        raise ValueError("overlap set is empty")
    out = []
    for li, (m, overlap) in enumerate(zip(reinit_mask.layers, overlap_masks)):
        overlap = np.asarray(overlap) != 0
        if overlap.shape != m.shape:
            raise ValueError(f"layer {li}: overlap shape {overlap.shape} != mask shape {m.shape}")
        observed = int((overlap & (m != 0)).sum())
        layer_total = int(m.size)
        layer_unpruned = int(m.sum())
        expected = float(overlap.sum()) * layer_unpruned / layer_total
        flagged = expected == 0.0
        if flagged:
            relative = float("inf") if observed > 0 else 0.0
        else:
            relative = observed / expected - 1.0
        out.append(
            {
                "layer": li,
                "observed": observed,
                "expected": expected,
                "relative_increase": relative,
                "flagged": flagged,
            }
        )
    return out
