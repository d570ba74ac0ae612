"""Bit-exact artifact files: tensor checkpoints, masks, and run manifests.

Checkpoint container layout (all integers little-endian):

    magic   4 bytes  b"LTHC"
    version u16      currently 1
    count   u32      number of records
    record  u16      name length, then that many UTF-8 bytes
            u8       element type code: 0 = float32 LE, 1 = uint8
            u8       rank
            u32*rank dimensions
            bytes    payload, elem_size * prod(dims) bytes

Tensors round-trip bit-identically; rewinding depends on that. Masks use
the same container with uint8 payloads restricted to {0, 1}. Manifests
are JSON for human inspection; only tensors are binary.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .pruning import PruneMask

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "write_checkpoint",
    "read_checkpoint",
    "write_params",
    "read_params",
    "write_mask",
    "read_mask",
    "save_manifest",
    "load_manifest",
    "round_entry",
    "load_init_params",
    "load_rewind_params",
    "load_round_mask",
    "load_round_trained",
    "MANIFEST_NAME",
]

MAGIC = b"LTHC"
FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"

_TYPE_FLOAT32 = 0
_TYPE_UINT8 = 1
_DTYPES = {_TYPE_FLOAT32: np.dtype("<f4"), _TYPE_UINT8: np.dtype("u1")}
_ELEM_SIZE = {_TYPE_FLOAT32: 4, _TYPE_UINT8: 1}


def write_checkpoint(path, named_tensors) -> None:
    """Write an ordered sequence of (name, tensor) records.

    ``named_tensors`` may be a dict (iterated in insertion order) or a
    sequence of pairs. float32 and uint8 tensors are supported.
    """
    if hasattr(named_tensors, "items"):
        items = list(named_tensors.items())
    else:
        items = list(named_tensors)
    chunks = [MAGIC, struct.pack("<HI", FORMAT_VERSION, len(items))]
    for name, tensor in items:
        tensor = np.asarray(tensor)
        if tensor.dtype == np.float32:
            code = _TYPE_FLOAT32
        elif tensor.dtype == np.uint8:
            code = _TYPE_UINT8
        else:
            raise ValueError(f"record {name!r}: unsupported dtype {tensor.dtype}")
        name_bytes = name.encode("utf-8")
        if len(name_bytes) > 0xFFFF:
            raise ValueError(f"record name too long: {len(name_bytes)} bytes")
        if tensor.ndim > 0xFF:
            raise ValueError(f"record {name!r}: rank {tensor.ndim} exceeds format limit")
        chunks.append(struct.pack("<H", len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(struct.pack("<BB", code, tensor.ndim))
        chunks.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        payload = np.ascontiguousarray(tensor, dtype=_DTYPES[code]).tobytes()
        chunks.append(payload)
    Path(path).write_bytes(b"".join(chunks))


def _need(data: bytes, offset: int, size: int, what: str) -> None:
    if offset + size > len(data):
        raise FormatError(f"truncated {what}", offset=offset)


def _parse_records(data: bytes) -> list:
    """Parse the container; returns (name, tensor, payload_offset) triples."""
    _need(data, 0, 4, "magic")
    if data[:4] != MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", offset=0)
    _need(data, 4, 6, "header")
    version, count = struct.unpack_from("<HI", data, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}", offset=4)
    offset = 10
    out = []
    for _ in range(count):
        _need(data, offset, 2, "record name length")
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        _need(data, offset, name_len, "record name")
        name = data[offset:offset + name_len].decode("utf-8")
        offset += name_len
        _need(data, offset, 2, "record header")
        code, rank = struct.unpack_from("<BB", data, offset)
        offset += 2
        if code not in _DTYPES:
            raise FormatError(f"record {name!r}: unknown element type code {code}", offset=offset - 2)
        _need(data, offset, 4 * rank, "record dimensions")
        dims = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        n_elems = 1
        for d in dims:
            n_elems *= d
        payload_size = n_elems * _ELEM_SIZE[code]
        _need(data, offset, payload_size, f"payload of record {name!r}")
        arr = np.frombuffer(data, dtype=_DTYPES[code], count=n_elems, offset=offset)
        out.append((name, arr.reshape(dims).copy(), offset))
        offset += payload_size
    if offset != len(data):
        raise FormatError(f"trailing bytes after {count} records", offset=offset)
    return out


def read_checkpoint(path) -> dict:
    """Read a checkpoint back as an ordered name -> tensor dict, bit-exactly."""
    return {name: arr for name, arr, _ in _parse_records(Path(path).read_bytes())}


def write_params(path, params) -> None:
    """Persist a ParameterSet as layer{i}.weight / layer{i}.bias records."""
    records = []
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        records.append((f"layer{i}.weight", w))
        records.append((f"layer{i}.bias", b))
    write_checkpoint(path, records)


def read_params(path, tag: str = "theta0"):
    from .model import ParameterSet  # local import to avoid a cycle

    records = read_checkpoint(path)
    weights = []
    biases = []
    i = 0
    while f"layer{i}.weight" in records:
        weights.append(records[f"layer{i}.weight"])
        biases.append(records[f"layer{i}.bias"])
        i += 1
    if not weights:
        raise FormatError(f"{path} holds no layer records")
    return ParameterSet(weights=weights, biases=biases, tag=tag)


def write_mask(path, mask: PruneMask) -> None:
    """Persist a mask; payload bytes are validated to be 0/1."""
    records = []
    for i, m in enumerate(mask.layers):
        if (m > 1).any():
            raise ValueError(f"mask layer {i} contains values outside {{0, 1}}")
        records.append((f"layer{i}", m))
    write_checkpoint(path, records)


def read_mask(path, round_index: int = 0) -> PruneMask:
    records = _parse_records(Path(path).read_bytes())
    by_name = {name: (arr, off) for name, arr, off in records}
    layers = []
    i = 0
    while f"layer{i}" in by_name:
        m, payload_off = by_name[f"layer{i}"]
        if m.dtype != np.uint8:
            raise FormatError(f"mask layer {i} is not uint8")
        flat = m.reshape(-1)
        bad = np.nonzero(flat > 1)[0]
        if bad.size:
            raise FormatError(
                f"mask layer {i} byte value {int(flat[bad[0]])} outside {{0, 1}}",
                offset=payload_off + int(bad[0]),
            )
        layers.append(m)
        i += 1
    if not layers:
        raise FormatError(f"{path} holds no mask layers")
    return PruneMask(layers, round_index=round_index)


def save_manifest(run_dir, manifest: dict) -> Path:
    path = Path(run_dir) / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def load_manifest(run_dir, check_files: bool = True) -> dict:
    run_dir = Path(run_dir)
    path = run_dir / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {run_dir}")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if check_files:
        referenced = [manifest.get("init_checkpoint"), manifest.get("rewind_checkpoint")]
        for entry in manifest.get("rounds", []):
            referenced.extend([entry.get("mask"), entry.get("trained_checkpoint")])
        for rel in referenced:
            if rel and not (run_dir / rel).exists():
                raise FileNotFoundError(f"manifest references missing file {rel} in {run_dir}")
    return manifest


def round_entry(manifest: dict, round_index: int) -> dict:
    for entry in manifest.get("rounds", []):
        if entry["round"] == round_index:
            return entry
    raise KeyError(f"manifest has no round {round_index}")


def load_init_params(run_dir, tag: str = "theta0"):
    manifest = load_manifest(run_dir, check_files=False)
    return read_params(Path(run_dir) / manifest["init_checkpoint"], tag=tag)


def load_rewind_params(run_dir, tag: str = "theta0_k"):
    manifest = load_manifest(run_dir, check_files=False)
    return read_params(Path(run_dir) / manifest["rewind_checkpoint"], tag=tag)


def load_round_mask(run_dir, round_index: int) -> PruneMask:
    manifest = load_manifest(run_dir, check_files=False)
    entry = round_entry(manifest, round_index)
    return read_mask(Path(run_dir) / entry["mask"], round_index=round_index)


def load_round_trained(run_dir, round_index: int):
    manifest = load_manifest(run_dir, check_files=False)
    entry = round_entry(manifest, round_index)
    return read_params(Path(run_dir) / entry["trained_checkpoint"], tag="theta_i_m")
