"""Synthetic digit corpus in canonical IDX files, for tests.

Renders procedural 10-class glyph images (28x28 grayscale, jittered and
noised) and serializes them with an independent struct-based IDX writer,
producing the same four files a real MNIST directory would hold. Used
wherever a test needs a full-size corpus but the assertion does not
depend on the identity of the real dataset (determinism, schedules,
structural analyses).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

CORPUS_SEED = 20240901
TRAIN_PER_CLASS = 6000
TEST_PER_CLASS = 1000

_GLYPHS = {
    0: ["XXXXX", "X...X", "X...X", "X...X", "X...X", "X...X", "XXXXX"],
    1: ["..X..", ".XX..", "..X..", "..X..", "..X..", "..X..", "XXXXX"],
    2: ["XXXXX", "....X", "....X", "XXXXX", "X....", "X....", "XXXXX"],
    3: ["XXXXX", "....X", "....X", ".XXXX", "....X", "....X", "XXXXX"],
    4: ["X...X", "X...X", "X...X", "XXXXX", "....X", "....X", "....X"],
    5: ["XXXXX", "X....", "X....", "XXXXX", "....X", "....X", "XXXXX"],
    6: ["XXXXX", "X....", "X....", "XXXXX", "X...X", "X...X", "XXXXX"],
    7: ["XXXXX", "....X", "...X.", "..X..", "..X..", ".X...", ".X..."],
    8: ["XXXXX", "X...X", "X...X", "XXXXX", "X...X", "X...X", "XXXXX"],
    9: ["XXXXX", "X...X", "X...X", "XXXXX", "....X", "....X", "XXXXX"],
}


def _glyph_array(digit: int) -> np.ndarray:
    rows = _GLYPHS[digit]
    bitmap = np.array([[c == "X" for c in row] for row in rows], dtype=np.float32)
    return np.kron(bitmap, np.ones((3, 3), dtype=np.float32))  # 21 x 15


def render_images(labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Render one jittered, noisy glyph image per label; uint8 [n, 28, 28]."""
    glyphs = {d: _glyph_array(d) for d in range(10)}
    n = labels.shape[0]
    canvas = np.zeros((n, 28, 28), dtype=np.float32)
    dy = rng.integers(0, 8, size=n)     # 28 - 21 rows of slack
    dx = rng.integers(2, 12, size=n)    # keep the glyph away from the edge
    intensity = rng.uniform(0.6, 1.0, size=n).astype(np.float32)
    for i in range(n):
        g = glyphs[int(labels[i])]
        canvas[i, dy[i]:dy[i] + 21, dx[i]:dx[i] + 15] = g * intensity[i]
    canvas *= 255.0
    canvas += rng.normal(0.0, 24.0, size=canvas.shape)
    # Random pixel dropout roughens the strokes.
    canvas *= rng.random(canvas.shape) > 0.08
    return np.clip(canvas, 0, 255).astype(np.uint8)


def _balanced_labels(per_class: int, rng: np.random.Generator) -> np.ndarray:
    labels = np.repeat(np.arange(10, dtype=np.uint8), per_class)
    rng.shuffle(labels)
    return labels


def write_idx_images(path: Path, images: np.ndarray) -> None:
    """Serialize uint8 [n, rows, cols] images; independent of the package reader."""
    n, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        fh.write(images.tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, labels.shape[0]))
        fh.write(labels.astype(np.uint8).tobytes())


def generate_corpus(data_dir: Path, seed: int = CORPUS_SEED) -> Path:
    """Write the four canonical IDX files into ``data_dir``."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    train_labels = _balanced_labels(TRAIN_PER_CLASS, rng)
    test_labels = _balanced_labels(TEST_PER_CLASS, rng)
    write_idx_images(data_dir / "train-images-idx3-ubyte", render_images(train_labels, rng))
    write_idx_labels(data_dir / "train-labels-idx1-ubyte", train_labels)
    write_idx_images(data_dir / "t10k-images-idx3-ubyte", render_images(test_labels, rng))
    write_idx_labels(data_dir / "t10k-labels-idx1-ubyte", test_labels)
    return data_dir
