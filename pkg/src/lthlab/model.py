"""Masked multilayer perceptron: forward, backprop, SGD, evaluation.

The canonical network is the 784-300-100-10 fully connected classifier
(ReLU activations, softmax cross-entropy), but every operation works for
arbitrary layer widths so gradient checks can run on shrunken nets.

Masking discipline: the forward pass always multiplies weights by the
mask, weight gradients are masked, and updated weights are re-masked
after every step, so a pruned coordinate is exactly zero at all times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mnist import Dataset, make_batch_plan, shuffle_stream
from .numerics import column_sums_fixed, matmul_fixed, matmul_t_fixed
from .pruning import PruneMask
from .rng import RngStream, kaiming_normal_init

__all__ = [
    "LENET_DIMS",
    "ParameterSet",
    "TrainReport",
    "init_mlp",
    "init_lenet",
    "forward",
    "loss_and_gradients",
    "sgd_step",
    "train",
    "evaluate",
]

LENET_DIMS = (784, 300, 100, 10)

TAG_INIT = "theta0"
TAG_REWIND = "theta0_k"
TAG_TRAINED = "theta_i_m"

_F32_ZERO = np.float32(0.0)


@dataclass
class ParameterSet:
    """Ordered fully connected layers: weight [in, out] and bias [out] tensors."""

    weights: list
    biases: list
    tag: str = TAG_INIT

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must have the same layer count")
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ValueError(f"inconsistent layer shapes: weight {w.shape}, bias {b.shape}")

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def dims(self) -> tuple:
        return tuple([self.weights[0].shape[0]] + [w.shape[1] for w in self.weights])

    def copy(self, tag: str | None = None) -> "ParameterSet":
        return ParameterSet(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            tag=self.tag if tag is None else tag,
        )


@dataclass
class TrainReport:
    losses: np.ndarray
    iterations: int
    epochs_completed: int


def init_mlp(dims: Sequence[int], rng: RngStream, tag: str = TAG_INIT) -> ParameterSet:
    """Initialize an MLP: Kaiming-normal weights (fan_in = layer input width),
    zero biases. Layers consume the stream in order, weights only."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2:
        raise ValueError("need at least an input and an output dimension")
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(kaiming_normal_init((fan_in, fan_out), fan_in, rng))
        biases.append(np.zeros(fan_out, dtype=np.float32))
    return ParameterSet(weights=weights, biases=biases, tag=tag)


def init_lenet(rng: RngStream, tag: str = TAG_INIT) -> ParameterSet:
    return init_mlp(LENET_DIMS, rng, tag=tag)


def _check_mask(params: ParameterSet, mask: PruneMask) -> None:
    if mask.num_layers != params.num_layers:
        raise ValueError(f"mask has {mask.num_layers} layers, params {params.num_layers}")
    for w, m in zip(params.weights, mask.layers):
        if w.shape != m.shape:
            raise ValueError(f"mask shape {m.shape} does not match weight shape {w.shape}")


def _effective_weights(params: ParameterSet, mask: PruneMask) -> list:
    # np.where keeps masked-out entries at +0.0 exactly.
    return [np.where(m != 0, w, _F32_ZERO) for w, m in zip(params.weights, mask.layers)]


def _forward_cached(params: ParameterSet, mask: PruneMask, batch: np.ndarray):
    _check_mask(params, mask)
    x = np.ascontiguousarray(np.asarray(batch, dtype=np.float32))
    if x.ndim != 2 or x.shape[1] != params.weights[0].shape[0]:
        raise ValueError(f"batch shape {x.shape} does not feed a {params.dims} net")
    effective = _effective_weights(params, mask)
    activations = [x]
    pre_relu = []
    h = x
    last = params.num_layers - 1
    for layer, (eff, b) in enumerate(zip(effective, params.biases)):
        pre = matmul_fixed(h, eff)
        pre += b
        if layer < last:
            pre_relu.append(pre)
            h = np.maximum(pre, _F32_ZERO)
            activations.append(h)
        else:
            logits = pre
    return logits, activations, pre_relu, effective


def forward(params: ParameterSet, mask: PruneMask, batch: np.ndarray) -> np.ndarray:
    """Logits for a [batch, in] input under the given mask."""
    logits, _, _, _ = _forward_cached(params, mask, batch)
    return logits


def _softmax_rows(logits: np.ndarray):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    denom = e.sum(axis=1, keepdims=True)
    return shifted, e / denom, denom


def loss_and_gradients(params: ParameterSet, mask: PruneMask, batch: np.ndarray, labels):
    """Mean softmax cross-entropy and mask-respecting gradients.

    Pruned coordinates receive an exactly-zero weight gradient; biases are
    never masked.
    """
    logits, activations, pre_relu, effective = _forward_cached(params, mask, batch)
    y = np.asarray(labels, dtype=np.int64)
    n = logits.shape[0]
    if y.shape != (n,):
        raise ValueError(f"labels shape {y.shape} does not match batch of {n}")
    if y.size and (y.min() < 0 or y.max() >= logits.shape[1]):
        raise ValueError("label out of range")

    shifted, probs, denom = _softmax_rows(logits)
    rows = np.arange(n)
    per_sample = np.log(denom[:, 0].astype(np.float64)) - shifted[rows, y].astype(np.float64)
    loss = float(per_sample.mean())

    dlogits = probs
    dlogits[rows, y] -= np.float32(1.0)
    dlogits *= np.float32(1.0 / n)

    grad_w = [None] * params.num_layers
    grad_b = [None] * params.num_layers
    delta = dlogits
    for layer in range(params.num_layers - 1, -1, -1):
        below = activations[layer]
        grad_w[layer] = matmul_t_fixed(below, delta)
        grad_b[layer] = column_sums_fixed(delta)
        if layer > 0:
            back = matmul_fixed(delta, np.ascontiguousarray(effective[layer].T))
            delta = back * (pre_relu[layer - 1] > _F32_ZERO)
    grad_w = [np.where(m != 0, g, _F32_ZERO) for g, m in zip(grad_w, mask.layers)]
    grads = ParameterSet(weights=grad_w, biases=grad_b, tag=params.tag)
    return loss, grads


def sgd_step(params: ParameterSet, gradients: ParameterSet, lr: float, mask: PruneMask) -> ParameterSet:
    """One plain SGD update; pruned weights are forced back to exactly zero."""
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")
    _check_mask(params, mask)
    lrf = np.float32(lr)
    new_w = [
        np.where(m != 0, w - lrf * g, _F32_ZERO)
        for w, g, m in zip(params.weights, gradients.weights, mask.layers)
    ]
    new_b = [b - lrf * g for b, g in zip(params.biases, gradients.biases)]
    return ParameterSet(weights=new_w, biases=new_b, tag=params.tag)


def batches_per_epoch(count: int, batch_size: int) -> int:
    return math.ceil(count / batch_size)


def train_window(
    params: ParameterSet,
    mask: PruneMask,
    dataset: Dataset,
    lr: float,
    batch_size: int,
    seed: int,
    begin_iteration: int,
    end_iteration: int,
):
    """Run masked SGD over the iteration window [begin, end) of the seeded
    epoch stream.

    Iteration t belongs to epoch t // batches_per_epoch; each epoch's batch
    order comes solely from the ``shuffle/<epoch>`` stream, so every window
    over the same (seed, dataset, batch size) replays identical batches.
    """
    if end_iteration < begin_iteration:
        raise ValueError("end_iteration must be >= begin_iteration")
    bpe = batches_per_epoch(dataset.count, batch_size)
    current = params.copy()
    losses = []
    epoch = begin_iteration // bpe
    t = epoch * bpe
    while t < end_iteration:
        plan = make_batch_plan(dataset.count, batch_size, epoch, shuffle_stream(seed, epoch))
        for idx in plan.batches:
            if t >= end_iteration:
                break
            if t >= begin_iteration:
                x = dataset.images[idx]
                y = dataset.labels[idx]
                loss, grads = loss_and_gradients(current, mask, x, y)
                current = sgd_step(current, grads, lr, mask)
                losses.append(loss)
            t += 1
        epoch += 1
    report = TrainReport(
        losses=np.asarray(losses, dtype=np.float64),
        iterations=end_iteration - begin_iteration,
        epochs_completed=(end_iteration - begin_iteration) // bpe,
    )
    return current, report


def train(
    params: ParameterSet,
    mask: PruneMask,
    dataset: Dataset,
    epochs: int,
    lr: float,
    batch_size: int,
    seed: int,
):
    """Train for ``epochs`` full passes in deterministic plan order."""
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    bpe = batches_per_epoch(dataset.count, batch_size)
    return train_window(params, mask, dataset, lr, batch_size, seed, 0, epochs * bpe)


def evaluate(params: ParameterSet, mask: PruneMask, dataset: Dataset, batch_size: int = 1000) -> float:
    """Top-1 accuracy over the split; argmax ties resolve to the lowest class."""
    correct = 0
    for start in range(0, dataset.count, batch_size):
        x = dataset.images[start:start + batch_size]
        y = dataset.labels[start:start + batch_size]
        logits = forward(params, mask, x)
        pred = np.argmax(logits, axis=1)
        correct += int((pred == y).sum())
    return correct / dataset.count
