"""Independent reference implementations used as test oracles.

Everything here is deliberately written without the package's kernels:
scalar float32 loops, float64 numpy math, and plain Python sorting.
"""

from __future__ import annotations

import numpy as np


def naive_affine_f32(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Scalar float32 triple loop: ascending-k accumulation, bias added last."""
    m, kdim = x.shape
    n = w.shape[1]
    out = np.empty((m, n), dtype=np.float32)
    for i in range(m):
        for j in range(n):
            acc = np.float32(0.0)
            for k in range(kdim):
                acc = np.float32(acc + np.float32(x[i, k] * w[k, j]))
            out[i, j] = np.float32(acc + bias[j])
    return out


def naive_matmul_f32(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    zero_bias = np.zeros(b.shape[1], dtype=np.float32)
    return naive_affine_f32(a, b, zero_bias)


def forward_f64(weights, biases, mask_layers, x: np.ndarray) -> np.ndarray:
    """Float64 reference forward pass (ReLU MLP) via plain numpy matmul."""
    h = x.astype(np.float64)
    last = len(weights) - 1
    for li, (w, b, m) in enumerate(zip(weights, biases, mask_layers)):
        eff = w.astype(np.float64) * (np.asarray(m) != 0)
        h = h @ eff + b.astype(np.float64)
        if li < last:
            h = np.maximum(h, 0.0)
    return h


def loss_f64(weights, biases, mask_layers, x: np.ndarray, labels: np.ndarray) -> float:
    """Float64 mean softmax cross-entropy of the reference forward pass."""
    logits = forward_f64(weights, biases, mask_layers, x)
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(len(labels)), labels]
    return float((logsumexp - picked).mean())


def finite_difference_weight_grads(weights, biases, mask_layers, x, labels, eps=1e-3):
    """Central finite differences of the float64 loss w.r.t. every weight."""
    grads = []
    for li in range(len(weights)):
        w = weights[li].astype(np.float64)
        g = np.zeros_like(w)
        for idx in np.ndindex(*w.shape):
            orig = w[idx]
            probe = [wt.astype(np.float64) for wt in weights]
            probe[li][idx] = orig + eps
            up = loss_f64(probe, biases, mask_layers, x, labels)
            probe[li][idx] = orig - eps
            down = loss_f64(probe, biases, mask_layers, x, labels)
            g[idx] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def finite_difference_bias_grads(weights, biases, mask_layers, x, labels, eps=1e-3):
    grads = []
    for li in range(len(biases)):
        b = biases[li].astype(np.float64)
        g = np.zeros_like(b)
        for idx in np.ndindex(*b.shape):
            orig = b[idx]
            probe = [bt.astype(np.float64) for bt in biases]
            probe[li][idx] = orig + eps
            up = loss_f64(weights, probe, mask_layers, x, labels)
            probe[li][idx] = orig - eps
            down = loss_f64(weights, probe, mask_layers, x, labels)
            g[idx] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def brute_force_select(entries, fraction: float):
    """Full Python sort over (score, layer, index) tuples; lowest floor-count."""
    count = int(np.floor(fraction * len(entries)))
    ordered = sorted(entries, key=lambda e: (e[0], e[1], e[2]))
    return set((layer, index) for _, layer, index in ordered[:count])


def global_magnitude_select(weight_layers, mask_layers, fraction: float):
    """Classical global magnitude pruning: sort |w| of survivors directly."""
    entries = []
    for li, (w, m) in enumerate(zip(weight_layers, mask_layers)):
        flat_w = np.abs(np.asarray(w, dtype=np.float64).reshape(-1))
        flat_m = np.asarray(m).reshape(-1)
        for idx in np.nonzero(flat_m != 0)[0]:
            entries.append((flat_w[idx], li, int(idx)))
    return brute_force_select(entries, fraction)
