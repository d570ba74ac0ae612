"""Iterative train-score-prune-rewind orchestration.

One run: initialize from the seeded ``init`` stream, pretrain to the
rewind iteration, then repeatedly train to completion, score surviving
weights with the configured importance metric, prune the globally lowest
fraction, and rewind survivors to the pretrained snapshot. Every round's
mask and checkpoints are persisted under the run directory together with
a JSON manifest, so analyses and reports can be reproduced from disk.

The randomness budget is strict: the init stream is consumed once at
startup, training consumes only per-epoch shuffle streams, and pruning
consumes nothing. Runs that differ only in the metric therefore share
their initialization and every batch order bit-for-bit.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .analysis import mask_overlap
from .metrics import METRIC_NAMES, compute_importance
from .mnist import Dataset
from .model import (
    LENET_DIMS,
    TAG_INIT,
    TAG_REWIND,
    TAG_TRAINED,
    ParameterSet,
    batches_per_epoch,
    evaluate,
    init_mlp,
    train_window,
)
from .persistence import (
    load_manifest,
    load_init_params,
    load_round_mask,
    save_manifest,
    write_mask,
    write_params,
)
from .pruning import PruneMask, apply_prune, detect_layer_collapse, pool_scores, select_prune_set
from .rng import RngStream, kaiming_normal_init, seeded_stream

__all__ = ["RunConfig", "TicketRecord", "ltr_run", "rewind", "partial_reinit", "partial_reinit_run"]

_F32_ZERO = np.float32(0.0)


@dataclass
class RunConfig:
    """Hyperparameters of one pruning run."""

    metric: str
    rounds: int
    epochs_per_round: int
    batch_size: int
    rewind_iteration: int = 0
    prune_fraction: float = 0.2
    lr: float = 0.1
    seed: int = 0
    out_dir: str | None = None
    halt_on_collapse: bool = False
    dims: tuple = LENET_DIMS

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)

    def validate(self) -> None:
        if self.metric not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.metric!r}, expected one of {METRIC_NAMES}")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.epochs_per_round < 1:
            raise ValueError("epochs_per_round must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.rewind_iteration < 0:
            raise ValueError("rewind_iteration must be >= 0")
        if not (0.0 <= self.prune_fraction < 1.0):
            raise ValueError("prune_fraction must be in [0, 1)")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    def to_manifest_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        return d

    @classmethod
    def from_manifest_dict(cls, d: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class TicketRecord:
    """One row of a run: the mask trained this round and how it fared."""

    round_index: int
    mask: PruneMask
    sparsity: float
    accuracy: float
    collapsed_layers: list = field(default_factory=list)
    mask_path: str = ""
    trained_path: str = ""
    rewind_path: str = ""


def rewind(current: ParameterSet, checkpoint: ParameterSet, mask: PruneMask) -> ParameterSet:
    """Reset unpruned weights and all biases bit-exactly to the checkpoint.

    Pruned weights stay exactly zero. The result depends only on the
    checkpoint and the mask; ``current`` fixes the expected shapes.
    """
    if [w.shape for w in current.weights] != [w.shape for w in checkpoint.weights]:
        raise ValueError("current and checkpoint shapes differ")
    weights = [np.where(m != 0, w, _F32_ZERO) for w, m in zip(checkpoint.weights, mask.layers)]
    biases = [b.copy() for b in checkpoint.biases]
    return ParameterSet(weights=weights, biases=biases, tag=checkpoint.tag)


def partial_reinit(theta0: ParameterSet, keep_masks, rng: RngStream) -> ParameterSet:
    """Keep selected coordinates of an initialization, redraw the rest.

    ``keep_masks`` holds one 0/1 (or boolean) array per layer. Redrawn
    weights come from the layer's original Kaiming-normal distribution;
    biases are kept as-is. Each layer consumes a full-shape draw from the
    stream regardless of how many coordinates are kept, so consumption is
    data-independent.
    """
    if len(keep_masks) != theta0.num_layers:
        raise ValueError(f"{len(keep_masks)} keep masks for {theta0.num_layers} layers")
    weights = []
    for w, keep in zip(theta0.weights, keep_masks):
        keep = np.asarray(keep)
        if keep.shape != w.shape:
            raise ValueError(f"keep mask shape {keep.shape} != weight shape {w.shape}")
        fresh = kaiming_normal_init(w.shape, w.shape[0], rng)
        weights.append(np.where(keep != 0, w, fresh))
    return ParameterSet(weights=weights, biases=[b.copy() for b in theta0.biases], tag=TAG_INIT)


def _score_and_prune(config: RunConfig, trained: ParameterSet, mask: PruneMask):
    scores = compute_importance(config.metric, trained, mask, allow_empty=True)
    pooled = pool_scores(scores, mask)
    selection, _threshold = select_prune_set(pooled, config.prune_fraction)
    return apply_prune(mask, selection, trained)


def ltr_run(
    config: RunConfig,
    train_ds: Dataset,
    test_ds: Dataset,
    *,
    theta0_override: ParameterSet | None = None,
    log=None,
) -> list:
    """Execute a full pruning run and persist its artifacts.

    Returns one TicketRecord per completed round (``rounds + 1`` of them:
    the dense round 0 plus one per pruning step). Layer collapse is
    recorded on the affected round and the run continues unless
    ``halt_on_collapse`` is set.
    """
    config.validate()
    if config.out_dir is None:
        raise ValueError("config.out_dir must be set for a persisted run")
    if config.dims[0] != train_ds.images.shape[1]:
        raise ValueError(
            f"network input width {config.dims[0]} != dataset pixels {train_ds.images.shape[1]}"
        )
    bpe = batches_per_epoch(train_ds.count, config.batch_size)
    iters_per_round = config.epochs_per_round * bpe
    if config.rewind_iteration >= iters_per_round:
        raise ValueError(
            f"rewind_iteration {config.rewind_iteration} must be below "
            f"iterations per round {iters_per_round}"
        )

    out_dir = Path(config.out_dir)
    (out_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)

    def say(msg: str) -> None:
        if log is not None:
            log(msg)

    if theta0_override is not None:
        theta0 = theta0_override.copy(tag=TAG_INIT)
        if theta0.dims != config.dims:
            raise ValueError(f"override dims {theta0.dims} != config dims {config.dims}")
    else:
        theta0 = init_mlp(config.dims, seeded_stream(config.seed, "init"))
    write_params(out_dir / "checkpoints" / "init.lthc", theta0)

    dense_mask = PruneMask.for_params(theta0)
    k = config.rewind_iteration
    if k > 0:
        say(f"pretraining {k} iterations")
        rewind_ckpt, _ = train_window(
            theta0, dense_mask, train_ds, config.lr, config.batch_size, config.seed, 0, k
        )
    else:
        rewind_ckpt = theta0.copy()
    rewind_ckpt.tag = TAG_REWIND
    write_params(out_dir / "checkpoints" / "rewind.lthc", rewind_ckpt)

    mask = dense_mask
    current = rewind_ckpt.copy()
    records: list[TicketRecord] = []
    manifest_rounds = []
    halted = False
    for round_index in range(config.rounds + 1):
        t0 = time.perf_counter()
        trained, _report = train_window(
            current, mask, train_ds, config.lr, config.batch_size, config.seed, k, iters_per_round
        )
        trained.tag = TAG_TRAINED
        accuracy = evaluate(trained, mask, test_ds)
        collapsed = detect_layer_collapse(mask)

        mask_rel = f"masks/round_{round_index:03d}.mask"
        trained_rel = f"checkpoints/round_{round_index:03d}_trained.lthc"
        write_mask(out_dir / mask_rel, mask)
        write_params(out_dir / trained_rel, trained)

        record = TicketRecord(
            round_index=round_index,
            mask=mask.copy(),
            sparsity=mask.global_sparsity(),
            accuracy=accuracy,
            collapsed_layers=collapsed,
            mask_path=mask_rel,
            trained_path=trained_rel,
            rewind_path="checkpoints/rewind.lthc",
        )
        records.append(record)
        manifest_rounds.append(
            {
                "round": round_index,
                "sparsity": record.sparsity,
                "accuracy": accuracy,
                "collapsed_layers": collapsed,
                "unpruned_per_layer": mask.unpruned_counts(),
                "mask": mask_rel,
                "trained_checkpoint": trained_rel,
                "seconds": round(time.perf_counter() - t0, 3),
            }
        )
        say(
            f"round {round_index}: sparsity {record.sparsity:.4%}, "
            f"accuracy {accuracy:.4f}"
            + (f", collapsed layers {collapsed}" if collapsed else "")
        )

        if collapsed and config.halt_on_collapse:
            halted = True
            break
        if round_index < config.rounds:
            mask, pruned_params = _score_and_prune(config, trained, mask)
            current = rewind(pruned_params, rewind_ckpt, mask)

    manifest = {
        "format_version": 1,
        "config": config.to_manifest_dict(),
        "batches_per_epoch": bpe,
        "iterations_per_round": iters_per_round,
        "init_checkpoint": "checkpoints/init.lthc",
        "rewind_checkpoint": "checkpoints/rewind.lthc",
        "halted_on_collapse": halted,
        "rounds": manifest_rounds,
    }
    save_manifest(out_dir, manifest)
    return records


def overlap_keep_masks(run_dirs, round_index: int) -> list:
    """Intersection (per-layer 0/1 arrays) of the runs' masks at a round."""
    masks = [load_round_mask(d, round_index) for d in run_dirs]
    report = mask_overlap(masks)
    return report.intersection


def partial_reinit_run(
    base_run_dir,
    overlap_from_dirs,
    round_index: int,
    reinit_seed: int,
    out_dir,
    train_ds: Dataset,
    test_ds: Dataset,
    *,
    log=None,
) -> list:
    """Re-run the base configuration from a partially reinitialized start.

    Coordinates in the overlap of the given runs' round-``round_index``
    masks keep their original initial values; every other weight is
    redrawn (stream label ``partial-reinit`` under ``reinit_seed``). The
    training procedure itself, including its master seed and therefore all
    batch orders, is inherited from the base run.
    """
    base_manifest = load_manifest(base_run_dir)
    config = RunConfig.from_manifest_dict(base_manifest["config"])
    config.out_dir = str(out_dir)

    keep = overlap_keep_masks(overlap_from_dirs, round_index)
    theta0 = load_init_params(base_run_dir)
    theta0_new = partial_reinit(theta0, keep, seeded_stream(reinit_seed, "partial-reinit"))

    records = ltr_run(config, train_ds, test_ds, theta0_override=theta0_new, log=log)

    manifest = load_manifest(out_dir)
    manifest["partial_reinit"] = {
        "base_run": str(base_run_dir),
        "overlap_from": [str(d) for d in overlap_from_dirs],
        "overlap_round": round_index,
        "reinit_seed": reinit_seed,
    }
    save_manifest(out_dir, manifest)
    return records
