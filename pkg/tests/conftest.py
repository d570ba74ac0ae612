import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

# numba-jitted code paths make per-example deadlines meaningless.
settings.register_profile("lthlab", deadline=None)
settings.load_profile("lthlab")

from lthlab.ltr import RunConfig, ltr_run
from lthlab.mnist import Dataset, load_dataset

import synthdigits

# Canonical reduced schedule used by the fast acceptance criteria.
CI_KWARGS = dict(rounds=6, epochs_per_round=3, batch_size=128, lr=0.1,
                 rewind_iteration=0, prune_fraction=0.2)


@pytest.fixture(scope="session")
def synth_data_dir(tmp_path_factory) -> Path:
    """Full-size synthetic corpus written as canonical IDX files."""
    return synthdigits.generate_corpus(tmp_path_factory.mktemp("synthdata"))


@pytest.fixture(scope="session")
def synth_train(synth_data_dir) -> Dataset:
    return load_dataset(synth_data_dir, "train")


@pytest.fixture(scope="session")
def synth_test(synth_data_dir) -> Dataset:
    return load_dataset(synth_data_dir, "test")


def mnist_dir_or_none() -> Path | None:
    env = os.environ.get("LTHLAB_DATA_DIR")
    if not env:
        return None
    path = Path(env)
    try:
        load_dataset(path, "test")
    except Exception:
        return None
    return path


@pytest.fixture(scope="session")
def mnist_data_dir() -> Path:
    path = mnist_dir_or_none()
    if path is None:
        pytest.skip(
            "canonical MNIST IDX files not available (set LTHLAB_DATA_DIR to a "
            "directory with the four standard files to run this criterion)"
        )
    return path


@pytest.fixture(scope="session")
def mnist_splits(mnist_data_dir):
    return load_dataset(mnist_data_dir, "train"), load_dataset(mnist_data_dir, "test")


def make_blob_dataset(n: int, dim: int, classes: int, seed: int, split: str = "train") -> Dataset:
    """Tiny Gaussian-blob classification set for fast unit tests."""
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((classes, dim)).astype(np.float32) * 2.0
    labels = rng.integers(0, classes, n).astype(np.int64)
    x = centers[labels] + rng.standard_normal((n, dim)).astype(np.float32)
    x -= x.min()
    x /= x.max()
    return Dataset(images=x.astype(np.float32), labels=labels, split=split)


@pytest.fixture(scope="session")
def blob_splits():
    return (
        make_blob_dataset(600, 20, 3, seed=101, split="train"),
        make_blob_dataset(240, 20, 3, seed=202, split="test"),
    )


@pytest.fixture(scope="session")
def run_cache(synth_train, synth_test, tmp_path_factory):
    """Session-cached pruning runs on the synthetic corpus.

    ``run_cache(metric, seed, **overrides)`` returns the run directory,
    executing the run only the first time a configuration is requested.
    """
    base = tmp_path_factory.mktemp("runs")
    cache: dict = {}

    def get(metric: str, seed: int, **overrides) -> Path:
        kwargs = {**CI_KWARGS, **overrides}
        key = (metric, seed, tuple(sorted(kwargs.items())))
        if key not in cache:
            out = base / f"{metric}-s{seed}-r{kwargs['rounds']}-e{kwargs['epochs_per_round']}"
            config = RunConfig(metric=metric, seed=seed, out_dir=str(out), **kwargs)
            ltr_run(config, synth_train, synth_test)
            cache[key] = out
        return cache[key]

    return get
