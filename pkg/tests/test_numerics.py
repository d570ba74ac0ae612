import numpy as np
import pytest

from lthlab.numerics import affine, column_sums_fixed, matmul_fixed, matmul_t_fixed

from oracles import naive_affine_f32, naive_matmul_f32


def _rand(shape, seed, scale=2.0):
    return (np.random.default_rng(seed).standard_normal(shape) * scale).astype(np.float32)


def test_affine_identity_weights():
    x = _rand((5, 7), 0)
    out = affine(x, np.eye(7, dtype=np.float32), np.zeros(7, dtype=np.float32))
    assert np.array_equal(out, x)


def test_affine_hand_example():
    x = np.array([[1.0, 2.0]], dtype=np.float32)
    w = np.array([[1.0], [1.0]], dtype=np.float32)
    b = np.zeros(1, dtype=np.float32)
    assert affine(x, w, b).tolist() == [[3.0]]


def test_affine_zero_input_returns_bias():
    w = _rand((6, 4), 1)
    b = _rand((4,), 2)
    out = affine(np.zeros((3, 6), dtype=np.float32), w, b)
    assert np.array_equal(out, np.broadcast_to(b, (3, 4)))


def test_affine_bit_equals_naive_triple_loop():
    for trial in range(15):
        rng = np.random.default_rng(trial)
        m, k, n = rng.integers(1, 33, size=3)
        x = _rand((m, k), 100 + trial, scale=3.0)
        w = _rand((k, n), 200 + trial, scale=3.0)
        b = _rand((n,), 300 + trial)
        got = affine(x, w, b)
        ref = naive_affine_f32(x, w, b)
        assert np.array_equal(got.view(np.uint32), ref.view(np.uint32))


def test_matmul_fixed_accepts_noncontiguous_and_matches_oracle():
    a = _rand((24, 18), 7)[::2, ::3]
    b = _rand((12, 6), 8).T  # 6 x 12 view
    got = matmul_fixed(np.ascontiguousarray(a), np.ascontiguousarray(b))
    ref = naive_matmul_f32(np.ascontiguousarray(a), np.ascontiguousarray(b))
    assert np.array_equal(got.view(np.uint32), ref.view(np.uint32))
    # The wrapper itself copies non-contiguous input.
    assert np.array_equal(matmul_fixed(a, b), got)


def test_matmul_t_fixed_matches_explicit_transpose():
    for trial in range(10):
        rng = np.random.default_rng(50 + trial)
        r, m, n = rng.integers(1, 40, size=3)
        a = _rand((r, m), trial)
        b = _rand((r, n), 90 + trial)
        got = matmul_t_fixed(a, b)
        ref = naive_matmul_f32(np.ascontiguousarray(a.T), b)
        assert np.array_equal(got.view(np.uint32), ref.view(np.uint32))


def test_column_sums_fixed_matches_scalar_accumulation():
    a = _rand((37, 9), 4, scale=5.0)
    got = column_sums_fixed(a)
    ref = np.zeros(9, dtype=np.float32)
    for r in range(a.shape[0]):
        for j in range(9):
            ref[j] = np.float32(ref[j] + a[r, j])
    assert np.array_equal(got.view(np.uint32), ref.view(np.uint32))


def test_repeat_invocation_bit_identical():
    x = _rand((16, 30), 11)
    w = _rand((30, 12), 12)
    b = _rand((12,), 13)
    first = affine(x, w, b)
    second = affine(x, w, b)
    assert np.array_equal(first.view(np.uint32), second.view(np.uint32))


def test_outputs_finite_on_normal_inputs():
    x = _rand((64, 128), 21)
    w = _rand((128, 64), 22)
    b = _rand((64,), 23)
    assert np.isfinite(affine(x, w, b)).all()


@pytest.mark.parametrize(
    "x_shape,w_shape,b_shape",
    [((3, 4), (5, 2), (2,)), ((3, 4), (4, 2), (3,)), ((3,), (3, 2), (2,))],
)
def test_affine_shape_mismatch(x_shape, w_shape, b_shape):
    with pytest.raises(ValueError):
        affine(
            np.zeros(x_shape, dtype=np.float32),
            np.zeros(w_shape, dtype=np.float32),
            np.zeros(b_shape, dtype=np.float32),
        )


def test_wrong_dtype_rejected():
    with pytest.raises(ValueError):
        matmul_fixed(np.zeros((2, 2)), np.zeros((2, 2), dtype=np.float32))
