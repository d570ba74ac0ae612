"""Deterministic iterative-magnitude-pruning lab for fully connected nets.

Extracts sparse trainable subnetworks by repeated train/score/prune/rewind
rounds with pluggable layerwise importance metrics, under a bit-reproducible
training harness, and analyzes the structure of the resulting tickets.
"""

from .analysis import (
    OverlapReport,
    SparsityReport,
    StabilityReport,
    layer_sparsity_report,
    mask_overlap,
    sign_flip_report,
    stddev_trajectories,
    survival_ratio,
    weight_range_stats,
)
from .errors import FormatError, LayerCollapseError, ReportError
from .ltr import RunConfig, TicketRecord, ltr_run, partial_reinit, partial_reinit_run, rewind
from .metrics import METRIC_NAMES, ImportanceScores, compute_importance, layer_importance
from .mnist import BatchPlan, Dataset, load_dataset, make_batch_plan, parse_idx_images, parse_idx_labels
from .model import (
    LENET_DIMS,
    ParameterSet,
    TrainReport,
    evaluate,
    forward,
    init_lenet,
    init_mlp,
    loss_and_gradients,
    sgd_step,
    train,
)
from .numerics import affine, matmul_fixed
from .pruning import (
    PooledScores,
    PruneMask,
    PruneSelection,
    apply_prune,
    detect_layer_collapse,
    pool_scores,
    select_prune_set,
    sparsity_after_steps,
)
from .rng import RngStream, kaiming_normal_init, seeded_stream

__version__ = "0.1.0"
