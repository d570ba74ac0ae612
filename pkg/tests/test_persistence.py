import struct

import numpy as np
import pytest

from lthlab.errors import FormatError
from lthlab.model import init_mlp
from lthlab.persistence import (
    FORMAT_VERSION,
    MAGIC,
    read_checkpoint,
    read_mask,
    read_params,
    write_checkpoint,
    write_mask,
    write_params,
)
from lthlab.pruning import PruneMask
from lthlab.rng import seeded_stream


def _random_tensors(seed=0):
    rng = np.random.default_rng(seed)
    return {
        "layer0.weight": rng.standard_normal((7, 5)).astype(np.float32),
        "layer0.bias": rng.standard_normal(5).astype(np.float32),
        "mask": rng.integers(0, 2, size=(7, 5)).astype(np.uint8),
        "scalar": np.float32(3.25).reshape(()),
    }


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    tensors = _random_tensors()
    path = tmp_path / "ckpt.lthc"
    write_checkpoint(path, tensors)
    back = read_checkpoint(path)
    assert list(back) == list(tensors)
    for name in tensors:
        a, b = tensors[name], back[name]
        assert a.shape == b.shape and a.dtype == b.dtype
        assert np.asarray(a).tobytes() == b.tobytes()


def test_checkpoint_empty_record_list(tmp_path):
    path = tmp_path / "empty.lthc"
    write_checkpoint(path, [])
    assert read_checkpoint(path) == {}
    assert path.read_bytes() == MAGIC + struct.pack("<HI", FORMAT_VERSION, 0)


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.lthc"
    path.write_bytes(b"XXXX" + struct.pack("<HI", FORMAT_VERSION, 0))
    with pytest.raises(FormatError, match="magic") as exc:
        read_checkpoint(path)
    assert exc.value.offset == 0


def test_checkpoint_bad_version(tmp_path):
    path = tmp_path / "v9.lthc"
    path.write_bytes(MAGIC + struct.pack("<HI", 9, 0))
    with pytest.raises(FormatError, match="version"):
        read_checkpoint(path)


def test_checkpoint_truncations_report_offsets(tmp_path):
    full = tmp_path / "full.lthc"
    write_checkpoint(full, _random_tensors())
    data = full.read_bytes()
    for cut in (2, 7, 11, 14, 18, len(data) - 1):
        clipped = tmp_path / f"cut{cut}.lthc"
        clipped.write_bytes(data[:cut])
        with pytest.raises(FormatError) as exc:
            read_checkpoint(clipped)
        assert exc.value.offset is not None and exc.value.offset <= cut


def test_checkpoint_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "trail.lthc"
    write_checkpoint(path, [("a", np.zeros(2, dtype=np.float32))])
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(FormatError, match="trailing"):
        read_checkpoint(path)


def test_checkpoint_rejects_unsupported_dtype(tmp_path):
    with pytest.raises(ValueError, match="dtype"):
        write_checkpoint(tmp_path / "f64.lthc", [("x", np.zeros(3))])


def test_checkpoint_unicode_names(tmp_path):
    path = tmp_path / "uni.lthc"
    write_checkpoint(path, [("poids/écrêté", np.ones(2, dtype=np.float32))])
    assert "poids/écrêté" in read_checkpoint(path)


def test_params_round_trip(tmp_path):
    params = init_mlp((12, 8, 4), seeded_stream(1, "init"))
    path = tmp_path / "params.lthc"
    write_params(path, params)
    back = read_params(path)
    assert back.dims == (12, 8, 4)
    for a, b in zip(params.weights + params.biases, back.weights + back.biases):
        assert np.array_equal(a.view(np.uint32), b.view(np.uint32))


def test_mask_round_trip_and_file_size(tmp_path):
    mask = PruneMask([np.ones((4, 3), dtype=np.uint8), np.ones((3, 2), dtype=np.uint8)])
    path = tmp_path / "m.mask"
    write_mask(path, mask)
    back = read_mask(path, round_index=5)
    assert back.round_index == 5
    assert all(np.array_equal(a, b) for a, b in zip(back.layers, mask.layers))
    # header 10 + per record: 2 + len(name) + 2 + 4*rank + payload
    expected = 10
    for i, m in enumerate(mask.layers):
        expected += 2 + len(f"layer{i}") + 2 + 4 * m.ndim + m.size
    assert path.stat().st_size == expected


def test_mask_payload_outside_binary_rejected(tmp_path):
    path = tmp_path / "bad.mask"
    bad = np.array([[1, 0], [2, 1]], dtype=np.uint8)
    write_checkpoint(path, [("layer0", bad)])  # bypass write_mask validation
    with pytest.raises(FormatError, match="outside") as exc:
        read_mask(path)
    # Offset points into the payload: header 10 + 2 + 6 + 2 + 8 = 28, byte 2.
    assert exc.value.offset == 28 + 2
    # write_mask re-validates even if the arrays were mutated post-construction.
    mask = PruneMask([np.ones((2, 2), dtype=np.uint8)])
    mask.layers[0][0, 0] = 2
    with pytest.raises(ValueError):
        write_mask(tmp_path / "never.mask", mask)


def test_random_mask_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    mask = PruneMask([rng.integers(0, 2, size=(30, 20)).astype(np.uint8) for _ in range(3)])
    path = tmp_path / "rand.mask"
    write_mask(path, mask)
    back = read_mask(path)
    assert all(np.array_equal(a, b) for a, b in zip(back.layers, mask.layers))
