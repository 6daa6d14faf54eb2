"""Counter-based random streams for reproducible Monte Carlo.

Every stream is a Philox generator keyed by ``(seed, replicate, purpose)``.
Streams with different keys are statistically independent, and a stream
does not depend on how many other streams were drawn before it, so replicates
can run in any order or in parallel.
"""

from __future__ import annotations

import zlib

import numpy as np


def _purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def make_rng(seed: int, replicate: int = 0, purpose: str = "data") -> np.random.Generator:
    """Return the generator for one ``(seed, replicate, purpose)`` stream."""
    if seed < 0 or replicate < 0:
        raise ValueError("seed and replicate must be non-negative")
    ss = np.random.SeedSequence(
        entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=(int(replicate), _purpose_key(purpose)),
    )
    return np.random.Generator(np.random.Philox(ss))


def as_rng(rng) -> np.random.Generator:
    """Accept a Generator, an integer seed, or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return make_rng(0)
    return make_rng(int(rng))
