"""
Seedable, splittable random streams.

Streams are numpy's counter-based Philox generator keyed by
SeedSequence(seed, spawn_key=path); a child stream is addressed by appending a
name or integer to the path, so (seed, path) fully determines every draw.
"""
import zlib
from typing import Tuple, Union

import numpy as np

from src.numcore.matrix import Matrix

StreamId = Union[int, str]


def _stream_key(stream_id: StreamId) -> int:
    if isinstance(stream_id, str):
        return zlib.crc32(stream_id.encode("utf-8"))
    return int(stream_id)


class Rng:
    def __init__(self, seed: int, path: Tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(path)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(seq))

    def spawn(self, stream_id: StreamId) -> "Rng":
        """Independent deterministic child stream."""
        return Rng(self.seed, self.path + (_stream_key(stream_id),))

    def random(self, size) -> np.ndarray:
        """Uniform draws in [0, 1)."""
        return self._gen.random(size)

    def uniform(self, lo, hi, rows: int, cols: int) -> Matrix:
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        out = lo + (hi - lo) * self._gen.random((rows, cols))
        # lo + (hi - lo) * u can round up to hi
        return np.minimum(out, np.nextafter(hi, lo))

    def gaussian(self, rows: int, cols: int) -> Matrix:
        """Standard normal draws via Box-Muller over the uniform stream."""
        n = rows * cols
        pairs = (n + 1) // 2
        u1 = 1.0 - self._gen.random(pairs)  # (0, 1]
        u2 = self._gen.random(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([radius * np.cos(theta), radius * np.sin(theta)])[:n]
        return z.reshape(rows, cols)

    def integers(self, lo: int, hi: int, size=None) -> np.ndarray:
        """Integers in [lo, hi)."""
        return self._gen.integers(lo, hi, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, probs: np.ndarray, size: int) -> np.ndarray:
        """Multinomial resampling with replacement."""
        return self._gen.choice(len(probs), size=size, replace=True, p=probs)


def rng_gaussian(rng: Rng, rows: int, cols: int) -> Matrix:
    return rng.gaussian(rows, cols)


def rng_uniform(rng: Rng, lo: float, hi: float, rows: int, cols: int) -> Matrix:
    return rng.uniform(lo, hi, rows, cols)
