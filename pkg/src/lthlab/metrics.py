"""Layerwise importance scores computed from absolute weight values.

Five metrics are supported. ``magnitude`` is the identity on |w| (plain
global magnitude pruning once pooled); ``l1``, ``l2`` and ``softmax``
rescale each layer so its unpruned importances sum to one; ``minmax``
rescales each layer to the [0, 1] range. All denominators and extrema
range over the unpruned entries of the layer only.

Already-pruned entries never receive a score: they carry a NaN sentinel
in the score tensor and are excluded structurally (via the mask) from
pooling and from every normalization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LayerCollapseError
from .pruning import PruneMask

__all__ = ["METRIC_NAMES", "ImportanceScores", "layer_importance", "compute_importance"]

METRIC_NAMES = ("magnitude", "l1", "l2", "softmax", "minmax")

# Metrics whose formulas divide by (or span) layer statistics and therefore
# need at least one unpruned entry.
_NEEDS_SURVIVORS = frozenset({"l1", "l2", "softmax", "minmax"})


@dataclass
class ImportanceScores:
    """Per-layer score tensors aligned with the weight tensors.

    Scores are float64: rank fidelity with respect to |w| must survive the
    normalization arithmetic. Pruned entries hold NaN.
    """

    metric: str
    scores: list
    unpruned_counts: list


def layer_importance(
    metric: str,
    weights: np.ndarray,
    mask: np.ndarray,
    *,
    layer_index: int = 0,
    allow_empty: bool = False,
) -> np.ndarray:
    """Score one weight tensor; NaN marks pruned entries.

    Raises :class:`LayerCollapseError` for the normalizing metrics when the
    layer has no unpruned entries, unless ``allow_empty`` (the orchestrator
    continues past collapsed layers and just skips them).
    """
    if metric not in METRIC_NAMES:
        raise ValueError(f"unknown metric {metric!r}, expected one of {METRIC_NAMES}")
    weights = np.asarray(weights)
    mask = np.asarray(mask)
    if weights.shape != mask.shape:
        raise ValueError(f"weights shape {weights.shape} != mask shape {mask.shape}")
    alive = mask.reshape(-1) != 0
    out = np.full(weights.size, np.nan, dtype=np.float64)
    n_alive = int(alive.sum())
    if n_alive == 0:
        if metric in _NEEDS_SURVIVORS and not allow_empty:
            raise LayerCollapseError([layer_index])
        return out.reshape(weights.shape)

    a = np.abs(weights.reshape(-1)[alive].astype(np.float64))
    if metric == "magnitude":
        s = a
    elif metric == "l1":
        total = a.sum()
        # All-zero survivors carry no within-layer preference; score them
        # uniformly, which keeps the sum-to-one contract.
        s = a / total if total > 0 else np.full(n_alive, 1.0 / n_alive)
    elif metric == "l2":
        sq = a * a
        total = sq.sum()
        s = sq / total if total > 0 else np.full(n_alive, 1.0 / n_alive)
    elif metric == "softmax":
        # Shift by the max before exponentiating; softmax is shift-invariant
        # so this changes nothing and never overflows.
        e = np.exp(a - a.max())
        s = e / e.sum()
    else:  # minmax
        lo = a.min()
        span = a.max() - lo
        if span == 0.0:
            # No within-layer preference exists; 0.5 avoids both forced
            # protection and forced collapse.
            s = np.full(n_alive, 0.5)
        else:
            s = (a - lo) / span
    out[alive] = s
    return out.reshape(weights.shape)


def compute_importance(metric: str, weights, mask: PruneMask, *, allow_empty: bool = False) -> ImportanceScores:
    """Score every prunable layer of a parameter set (or list of tensors)."""
    tensors: Sequence[np.ndarray] = getattr(weights, "weights", weights)
    if len(tensors) != mask.num_layers:
        raise ValueError(f"{len(tensors)} weight tensors vs {mask.num_layers} mask layers")
    scores = [
        layer_importance(metric, w, m, layer_index=li, allow_empty=allow_empty)
        for li, (w, m) in enumerate(zip(tensors, mask.layers))
    ]
    return ImportanceScores(metric=metric, scores=scores, unpruned_counts=mask.unpruned_counts())
