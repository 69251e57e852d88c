"""Counter-based random streams and chunked Monte Carlo execution.

Every estimator in the package draws its randomness from a :class:`Stream`,
a (seed, key) pair that names one independent Philox substream.  Work is split
into fixed-size chunks, each with its own child stream, so results depend only
on (seed, replica count) and never on scheduling or worker count.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

# elements (paths x steps) materialised per chunk
CHUNK_ELEMENTS = 1 << 22


def _key_part(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    k = int(k)
    if k < 0:
        raise ValueError("stream keys must be non-negative")
    return k


@dataclass(frozen=True)
class Stream:
    """A named, reproducible substream of a 64-bit seed."""

    seed: int = 0
    key: tuple[int, ...] = ()

    def child(self, *key) -> "Stream":
        return Stream(self.seed, self.key + tuple(_key_part(k) for k in key))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))


def as_stream(rng) -> Stream:
    """Coerce an int seed (or an existing stream) to a :class:`Stream`."""
    if isinstance(rng, Stream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return Stream(int(rng))
    raise TypeError(f"expected a Stream or an integer seed, got {type(rng).__name__}")


def chunk_sizes(reps: int, width: int = 1, max_elements: int = CHUNK_ELEMENTS) -> list[int]:
    """Split ``reps`` replicas into chunks of at most ``max_elements / width`` paths."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    per = max(256, max_elements // max(1, width))
    full, rest = divmod(reps, per)
    return [per] * full + ([rest] if rest else [])


def map_chunks(
    fn: Callable[[np.random.Generator, int], T],
    reps: int,
    stream: Stream,
    width: int = 1,
    workers: int = 1,
) -> list[T]:
    """Run ``fn(generator, size)`` over all chunks; results come back in chunk order."""
    sizes = chunk_sizes(reps, width)
    gens = [stream.child(i).generator() for i in range(len(sizes))]
    if workers <= 1 or len(sizes) == 1:
        return [fn(g, s) for g, s in zip(gens, sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, gens, sizes))


def fsum_arrays(parts: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise compensated sum of equally shaped arrays (order independent)."""
    stacked = np.stack([np.asarray(p, dtype=float) for p in parts])
    flat = stacked.reshape(len(parts), -1)
    out = np.array([math.fsum(col) for col in flat.T])
    return out.reshape(stacked.shape[1:])
