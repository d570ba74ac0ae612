"""Dense float32 arithmetic with a fixed, bit-reproducible reduction order.

Every reduction in this module accumulates in float32, in ascending index
order of the contracted dimension, with no fused multiply-add. That makes
results bit-identical run to run and independent of thread count or build
mode, which the rewind/replay experiments rely on. The kernels must never
be swapped for BLAS calls: BLAS blocks and reorders its reductions.

The jitted loops are written so each output element has its own
accumulator; vectorization across output elements therefore cannot change
the floating-point result.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["matmul_fixed", "matmul_t_fixed", "column_sums_fixed", "affine"]


@njit(cache=True)
def _matmul_acc(a, b, out):
    # out[i, j] += sum_k a[i, k] * b[k, j], k ascending per (i, j).
    m, kdim = a.shape
    n = b.shape[1]
    for i in range(m):
        for k in range(kdim):
            av = a[i, k]
            for j in range(n):
                out[i, j] += av * b[k, j]


@njit(cache=True)
def _matmul_t_acc(a, b, out):
    # out[i, j] += sum_r a[r, i] * b[r, j], r ascending per (i, j).
    rdim, m = a.shape
    n = b.shape[1]
    for r in range(rdim):
        for i in range(m):
            av = a[r, i]
            for j in range(n):
                out[i, j] += av * b[r, j]


@njit(cache=True)
def _column_sums_acc(a, out):
    # out[j] += sum_r a[r, j], r ascending per j.
    rdim, n = a.shape
    for r in range(rdim):
        for j in range(n):
            out[j] += a[r, j]


def _as_input(x, name: str) -> np.ndarray:
    x = np.asarray(x)
    if x.dtype != np.float32:
        raise ValueError(f"{name} must be float32, got {x.dtype}")
    return np.ascontiguousarray(x)


def matmul_fixed(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a @ b`` for float32 2-D arrays, contracted in ascending index order."""
    a = _as_input(a, "a")
    b = _as_input(b, "b")
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"incompatible shapes for matmul: {a.shape} and {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.float32)
    _matmul_acc(a, b, out)
    return out


def matmul_t_fixed(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a.T @ b`` with the shared leading axis contracted in ascending order.

    Equivalent to ``matmul_fixed(a.T.copy(), b)`` but without the transpose
    copy; used for weight gradients where the contraction runs over the
    batch axis.
    """
    a = _as_input(a, "a")
    b = _as_input(b, "b")
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ValueError(f"incompatible shapes for transposed matmul: {a.shape} and {b.shape}")
    out = np.zeros((a.shape[1], b.shape[1]), dtype=np.float32)
    _matmul_t_acc(a, b, out)
    return out


def column_sums_fixed(a: np.ndarray) -> np.ndarray:
    """Per-column sums of a float32 2-D array, rows added in ascending order."""
    a = _as_input(a, "a")
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {a.shape}")
    out = np.zeros(a.shape[1], dtype=np.float32)
    _column_sums_acc(a, out)
    return out


def affine(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """``x @ weights + bias`` for a [batch, in] input and [in, out] weights.

    The product sum for each output element runs over the input dimension
    in ascending order; the bias is added once after the sum.
    """
    x = _as_input(x, "x")
    weights = _as_input(weights, "weights")
    bias = _as_input(bias, "bias")
    if x.ndim != 2 or weights.ndim != 2 or bias.ndim != 1:
        raise ValueError(
            f"affine expects 2-D x, 2-D weights, 1-D bias; got {x.shape}, {weights.shape}, {bias.shape}"
        )
    if x.shape[1] != weights.shape[0] or weights.shape[1] != bias.shape[0]:
        raise ValueError(
            f"affine shape mismatch: x {x.shape}, weights {weights.shape}, bias {bias.shape}"
        )
    out = np.zeros((x.shape[0], weights.shape[1]), dtype=np.float32)
    _matmul_acc(x, weights, out)
    out += bias
    return out
