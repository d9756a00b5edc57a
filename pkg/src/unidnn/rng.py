"""Seeded random streams.

All randomness in the package flows through :func:`make_rng`, which wraps
numpy's PCG64 bit generator.  PCG64 output is specified bit-for-bit by
numpy and is identical across platforms, so a seed fully determines every
dataset, channel draw and BER point.

Independent streams (one per sweep job, one per dataset, ...) are derived
with :func:`substream`, which hashes the parent seed together with an
integer key path through :class:`numpy.random.SeedSequence`.
"""

from __future__ import annotations

from typing import Union

import numpy as np

SeedLike = Union[int, np.random.Generator, None]


def make_rng(seed: SeedLike = None) -> np.random.Generator:
    """Return a PCG64 generator; an existing generator is passed through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def substream(seed: int, *key: int) -> np.random.Generator:
    """Deterministic child stream of ``seed`` addressed by ``key``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
