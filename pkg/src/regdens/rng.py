"""Deterministic random streams.

Every stochastic routine draws from a stream keyed by (seed, *tags), so a
run is reproducible bit-for-bit and independent of how sub-tasks are
scheduled across workers: the stream identity is part of the task, not of
the worker that happens to execute it.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(seed: int, *tags) -> np.random.Generator:
    """Philox generator keyed by a stable hash of (seed, tags)."""
    ident = repr((int(seed),) + tuple(str(t) for t in tags)).encode()
    key = int.from_bytes(hashlib.sha256(ident).digest()[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


def substreams(seed: int, tag: str, n: int) -> list[np.random.Generator]:
    """n streams for index-addressed sub-tasks (reduction order fixed by index)."""
    return [stream(seed, tag, i) for i in range(n)]
