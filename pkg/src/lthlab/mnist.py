"""IDX dataset parsing and deterministic mini-batch planning.

The IDX layout is fixed: a big-endian magic (0x00000803 for images,
0x00000801 for labels), big-endian 32-bit dimensions, then an
unsigned-byte payload. Pixels are scaled to [0, 1] by dividing by 255;
no further standardization is applied.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .errors import FormatError
from .rng import RngStream

__all__ = [
    "Dataset",
    "BatchPlan",
    "parse_idx_images",
    "parse_idx_labels",
    "make_batch_plan",
    "load_dataset",
    "IMAGE_MAGIC",
    "LABEL_MAGIC",
]

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

TRAIN_COUNT = 60000
TEST_COUNT = 10000

# Canonical file names, tried with and without gzip compression.
_SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass
class Dataset:
    """One split of an image-classification corpus.

    images are float32 in [0, 1], flattened row-major to [count, pixels];
    labels are integers in [0, 9].
    """

    images: np.ndarray
    labels: np.ndarray
    split: str

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"image count {self.images.shape[0]} != label count {self.labels.shape[0]}"
            )

    @property
    def count(self) -> int:
        return int(self.images.shape[0])


@dataclass
class BatchPlan:
    """Index slices covering one epoch; order is a pure function of (seed, epoch)."""

    epoch: int
    batches: list = field(default_factory=list)

    @property
    def num_batches(self) -> int:
        return len(self.batches)


def _read_be_u32(data: bytes, offset: int) -> int:
    if offset + 4 > len(data):
        raise FormatError("truncated header", offset=offset)
    return struct.unpack_from(">I", data, offset)[0]


def parse_idx_images(data: bytes) -> np.ndarray:
    """Parse an IDX image file into a float32 [count, rows*cols] tensor."""
    magic = _read_be_u32(data, 0)
    if magic != IMAGE_MAGIC:
        raise FormatError(f"bad image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}", offset=0)
    count = _read_be_u32(data, 4)
    rows = _read_be_u32(data, 8)
    cols = _read_be_u32(data, 12)
    for name, dim, off in (("count", count, 4), ("rows", rows, 8), ("cols", cols, 12)):
        if dim >= 1 << 31:
            raise FormatError(f"dimension overflow: {name}={dim}", offset=off)
    expected = count * rows * cols
    payload = len(data) - 16
    if payload < expected:
        raise FormatError(
            f"truncated payload: expected {expected} bytes, found {payload}", offset=16 + payload
        )
    if payload > expected:
        raise FormatError(
            f"trailing bytes: expected {expected} payload bytes, found {payload}",
            offset=16 + expected,
        )
    raw = np.frombuffer(data, dtype=np.uint8, count=expected, offset=16)
    images = raw.astype(np.float32).reshape(count, rows * cols)
    images /= np.float32(255.0)
    return images


def parse_idx_labels(data: bytes) -> np.ndarray:
    """Parse an IDX label file into an int64 array of values in [0, 9]."""
    magic = _read_be_u32(data, 0)
    if magic != LABEL_MAGIC:
        raise FormatError(f"bad label magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}", offset=0)
    count = _read_be_u32(data, 4)
    if count >= 1 << 31:
        raise FormatError(f"dimension overflow: count={count}", offset=4)
    payload = len(data) - 8
    if payload < count:
        raise FormatError(
            f"truncated payload: expected {count} bytes, found {payload}", offset=8 + payload
        )
    if payload > count:
        raise FormatError(
            f"trailing bytes: expected {count} payload bytes, found {payload}", offset=8 + count
        )
    raw = np.frombuffer(data, dtype=np.uint8, count=count, offset=8)
    bad = np.nonzero(raw > 9)[0]
    if bad.size:
        off = 8 + int(bad[0])
        raise FormatError(f"label value {int(raw[bad[0]])} out of range [0, 9]", offset=off)
    return raw.astype(np.int64)


@njit(cache=True)
def _fisher_yates(perm, words):
    # Descending Fisher-Yates; swap index = word mod (j + 1). The modulo
    # bias is < 6e-15 for any count below 2**48 and is accepted.
    n = perm.shape[0]
    for t in range(n - 1):
        j = n - 1 - t
        r = int(words[t] % np.uint64(j + 1))
        tmp = perm[j]
        perm[j] = perm[r]
        perm[r] = tmp


def make_batch_plan(count: int, batch_size: int, epoch: int, rng: RngStream) -> BatchPlan:
    """Shuffle [0, count) with the given stream and slice into batches.

    The permutation consumes exactly ``count - 1`` words; the trailing
    partial batch is kept, so an epoch has ceil(count / batch_size) batches.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    perm = np.arange(count, dtype=np.int64)
    if count > 1:
        _fisher_yates(perm, rng.raw(count - 1))
    batches = [perm[i:i + batch_size] for i in range(0, count, batch_size)]
    return BatchPlan(epoch=epoch, batches=batches)


def shuffle_stream(master_seed: int, epoch: int) -> RngStream:
    """The dedicated stream for epoch shuffling, label ``shuffle/<epoch>``.

    Keyed only by (seed, epoch) so the data order can never depend on how
    many pruning rounds preceded the epoch.
    """
    return RngStream(master_seed, f"shuffle/{epoch}")


def _read_file(path: Path) -> bytes:
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


def _find_split_file(data_dir: Path, stem: str) -> Path:
    for candidate in (data_dir / stem, data_dir / (stem + ".gz")):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"missing dataset file {stem}[.gz] in {data_dir}")


def load_dataset(data_dir, split: str) -> Dataset:
    """Load one canonical split ('train' or 'test') from ``data_dir``.

    Expects the standard IDX file names (optionally gzipped) and enforces
    the canonical corpus shape: 60000/10000 items of 784 pixels.
    """
    if split not in _SPLIT_FILES:
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    data_dir = Path(data_dir)
    image_stem, label_stem = _SPLIT_FILES[split]
    images = parse_idx_images(_read_file(_find_split_file(data_dir, image_stem)))
    labels = parse_idx_labels(_read_file(_find_split_file(data_dir, label_stem)))
    expected = TRAIN_COUNT if split == "train" else TEST_COUNT
    if images.shape[0] != expected:
        raise FormatError(f"{split} split has {images.shape[0]} items, expected {expected}")
    if images.shape[1] != 784:
        raise FormatError(f"{split} images have {images.shape[1]} pixels, expected 784")
    return Dataset(images=images, labels=labels, split=split)
