"""Seeded, labeled random streams with replayable consumption.

Every source of randomness in the lab is a counter-based Philox stream
keyed by ``(master_seed, stream_label)``. Distinct labels give independent
substreams, so e.g. weight initialization and epoch shuffling never couple
through consumption order. Streams are cheap to recreate and can be
fast-forwarded to a known position, which makes any draw replayable from
the run manifest alone.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

__all__ = ["RngStream", "seeded_stream", "kaiming_normal_init"]

_U64 = np.uint64
_INV_2_53 = 2.0 ** -53


def _philox_key(master_seed: int, stream_label: str) -> np.ndarray:
    digest = hashlib.sha256(f"{master_seed}:{stream_label}".encode("utf-8")).digest()
    return np.frombuffer(digest[:16], dtype="<u8").copy()


class RngStream:
    """A deterministic 64-bit random stream for one (seed, label) pair.

    The underlying generator is Philox4x64-10; the key is derived from the
    seed and label by SHA-256 so labels act as independent substreams. The
    stream's position is the number of 64-bit words drawn so far.
    """

    def __init__(self, master_seed: int, stream_label: str):
        if not stream_label:
            raise ValueError("stream_label must be non-empty")
        self.master_seed = int(master_seed)
        self.stream_label = stream_label
        self._bitgen = np.random.Philox(key=_philox_key(self.master_seed, stream_label))
        self.words_drawn = 0

    def raw(self, n: int) -> np.ndarray:
        """Draw the next ``n`` raw 64-bit words."""
        if n < 0:
            raise ValueError("n must be >= 0")
        if n == 0:
            return np.empty(0, dtype=np.uint64)
        out = self._bitgen.random_raw(n)
        self.words_drawn += n
        return out

    def uniforms(self, n: int) -> np.ndarray:
        """Draw ``n`` float64 uniforms in [0, 1), one word each (53 bits used)."""
        return (self.raw(n) >> _U64(11)).astype(np.float64) * _INV_2_53

    def standard_normals(self, n: int) -> np.ndarray:
        """Draw ``n`` float64 standard normals via paired Box-Muller.

        Consumption is branch-free: exactly ``2 * ceil(n / 2)`` words are
        consumed regardless of the values drawn, so replay never depends on
        the sampled content.
        """
        if n == 0:
            return np.empty(0, dtype=np.float64)
        pairs = (n + 1) // 2
        words = self.raw(2 * pairs)
        # u1 shifted into (0, 1] so log never sees zero; u2 in [0, 1).
        u1 = ((words[0::2] >> _U64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (words[1::2] >> _U64(11)).astype(np.float64) * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * math.pi) * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    @property
    def state(self) -> dict:
        """Serializable position of this stream."""
        return {
            "master_seed": self.master_seed,
            "stream_label": self.stream_label,
            "words_drawn": self.words_drawn,
        }

    @classmethod
    def from_state(cls, state: dict) -> "RngStream":
        """Recreate a stream and fast-forward it to a saved position."""
        stream = cls(state["master_seed"], state["stream_label"])
        remaining = int(state["words_drawn"])
        while remaining > 0:
            chunk = min(remaining, 1 << 20)
            stream.raw(chunk)
            remaining -= chunk
        return stream

    def __repr__(self) -> str:
        return (f"RngStream(master_seed={self.master_seed}, "
                f"stream_label={self.stream_label!r}, words_drawn={self.words_drawn})")


def seeded_stream(master_seed: int, stream_label: str) -> RngStream:
    """Create the deterministic stream for ``(master_seed, stream_label)``."""
    return RngStream(master_seed, stream_label)


def kaiming_normal_init(shape, fan_in: int, rng: RngStream) -> np.ndarray:
    """Sample a float32 tensor from Normal(0, sqrt(2 / fan_in)).

    The draw consumes the stream deterministically (see
    :meth:`RngStream.standard_normals`), so identical (shape, fan_in, stream
    position) yields a bit-identical tensor.
    """
    if fan_in < 1:
        raise ValueError(f"fan_in must be >= 1, got {fan_in}")
    shape = tuple(int(d) for d in shape)
    n = 1
    for d in shape:
        if d <= 0:
            raise ValueError(f"shape dimensions must be positive, got {shape}")
        n *= d
    std = math.sqrt(2.0 / fan_in)
    z = rng.standard_normals(n) * std
    return z.astype(np.float32).reshape(shape)
