"""Global score pooling, exact-count prune selection, and mask bookkeeping.

The per-round percentile is realized as exact-count selection: the
floor(fraction * unpruned) entries with the lowest (score, layer, index)
lexicographic key are pruned. Ties therefore resolve deterministically
and the sparsity trajectory is exactly reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .metrics import ImportanceScores
    from .model import ParameterSet

__all__ = [
    "PruneMask",
    "PooledScores",
    "PruneSelection",
    "pool_scores",
    "select_prune_set",
    "apply_prune",
    "sparsity_after_steps",
    "detect_layer_collapse",
]


@dataclass
class PruneMask:
    """Per-layer binary masks (1 = unpruned) plus the round that produced them."""

    layers: list
    round_index: int = 0

    def __post_init__(self):
        self.layers = [np.ascontiguousarray(m, dtype=np.uint8) for m in self.layers]
        for i, m in enumerate(self.layers):
            bad = (m > 1).any()
            if bad:
                raise ValueError(f"mask layer {i} contains values outside {{0, 1}}")

    @classmethod
    def all_ones(cls, shapes: Sequence[tuple], round_index: int = 0) -> "PruneMask":
        return cls([np.ones(s, dtype=np.uint8) for s in shapes], round_index=round_index)

    @classmethod
    def for_params(cls, params: "ParameterSet", round_index: int = 0) -> "PruneMask":
        return cls.all_ones([w.shape for w in params.weights], round_index=round_index)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def copy(self, round_index: int | None = None) -> "PruneMask":
        return PruneMask(
            [m.copy() for m in self.layers],
            round_index=self.round_index if round_index is None else round_index,
        )

    def unpruned_counts(self) -> list:
        return [int(m.sum()) for m in self.layers]

    def total_counts(self) -> list:
        return [int(m.size) for m in self.layers]

    def global_sparsity(self) -> float:
        total = sum(self.total_counts())
        return 1.0 - sum(self.unpruned_counts()) / total


@dataclass
class PooledScores:
    """All unpruned connections' scores with (layer, flat index) provenance.

    Entries are ordered layer-major, flat-index ascending.
    """

    score: np.ndarray
    layer: np.ndarray
    index: np.ndarray

    def __len__(self) -> int:
        return int(self.score.shape[0])

    def entries(self) -> list:
        """Materialize (score, layer, index) tuples, mostly for tests."""
        return list(zip(self.score.tolist(), self.layer.tolist(), self.index.tolist()))


@dataclass
class PruneSelection:
    """Connections chosen for pruning, as parallel (layer, flat index) arrays."""

    layer: np.ndarray
    index: np.ndarray

    def __len__(self) -> int:
        return int(self.layer.shape[0])


def pool_scores(scores: "ImportanceScores", mask: PruneMask) -> PooledScores:
    """Flatten every unpruned connection's score into one global pool."""
    if len(scores.scores) != mask.num_layers:
        raise ValueError("scores and mask layer counts differ")
    pooled_scores = []
    pooled_layers = []
    pooled_indices = []
    for li, (s, m) in enumerate(zip(scores.scores, mask.layers)):
        if s.shape != m.shape:
            raise ValueError(f"layer {li}: score shape {s.shape} != mask shape {m.shape}")
        flat_idx = np.nonzero(m.reshape(-1) != 0)[0]
        pooled_scores.append(np.asarray(s, dtype=np.float64).reshape(-1)[flat_idx])
        pooled_layers.append(np.full(flat_idx.shape[0], li, dtype=np.int32))
        pooled_indices.append(flat_idx.astype(np.int64))
    return PooledScores(
        score=np.concatenate(pooled_scores) if pooled_scores else np.empty(0, np.float64),
        layer=np.concatenate(pooled_layers) if pooled_layers else np.empty(0, np.int32),
        index=np.concatenate(pooled_indices) if pooled_indices else np.empty(0, np.int64),
    )


def select_prune_set(pooled: PooledScores, fraction: float):
    """Pick the floor(fraction * pool) lowest-scored connections.

    Ordering key is lexicographic (score, layer, flat index), so ties cannot
    overshoot the target count. Returns the selection and the threshold: the
    largest selected score (None when nothing is selected).
    """
    if not (0.0 <= fraction < 1.0):
        raise ValueError(f"fraction must be in [0, 1), got {fraction}")
    if fraction > 0.0 and len(pooled) == 0:
        raise ValueError("cannot select from an empty pool with fraction > 0")
    count = int(np.floor(fraction * len(pooled)))
    if count == 0:
        return PruneSelection(np.empty(0, np.int32), np.empty(0, np.int64)), None
    order = np.lexsort((pooled.index, pooled.layer, pooled.score))
    chosen = order[:count]
    threshold = float(pooled.score[chosen[-1]])
    return PruneSelection(layer=pooled.layer[chosen], index=pooled.index[chosen]), threshold


def apply_prune(mask: PruneMask, selection: PruneSelection, params: "ParameterSet"):
    """Zero the selected mask entries and the corresponding weights.

    Selecting an already-pruned coordinate is an invariant breach and
    raises rather than silently double-pruning.
    """
    new_mask = mask.copy(round_index=mask.round_index + 1)
    new_params = params.copy()
    for li in range(mask.num_layers):
        idx = selection.index[selection.layer == li]
        if idx.size == 0:
            continue
        flat_mask = new_mask.layers[li].reshape(-1)
        if (flat_mask[idx] == 0).any():
            raise RuntimeError(f"layer {li}: prune selection hits already-pruned coordinates")
        flat_mask[idx] = 0
        new_params.weights[li].reshape(-1)[idx] = np.float32(0.0)
    return new_mask, new_params


def sparsity_after_steps(steps: int, rate: float) -> float:
    """Idealized global sparsity after ``steps`` rounds at per-round ``rate``."""
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    if not (0.0 <= rate < 1.0):
        raise ValueError(f"rate must be in [0, 1), got {rate}")
    return 1.0 - (1.0 - rate) ** steps


def detect_layer_collapse(mask: PruneMask) -> list:
    """Indices of layers with zero unpruned connections.

    For a sequential MLP an empty layer is exactly the condition that blocks
    all information flow.
    """
    return [i for i, n in enumerate(mask.unpruned_counts()) if n == 0]
