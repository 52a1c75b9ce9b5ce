"""Deterministic random substreams.

Every stochastic component derives its generators from ``(seed, block, role)``
through :class:`numpy.random.SeedSequence`, so a draw never depends on how
work was scheduled. Records are grouped into fixed-size blocks; the block size
is part of the stream definition and must not change between runs that are
meant to be compared.
"""

from __future__ import annotations

import numpy as np

BLOCK_SIZE = 1024

ROLES = {
    "theta": 0,
    "sigma_hat": 1,
    "theta_hat": 2,
    "replication": 3,
    "posterior": 4,
    "replicate": 5,
    "gibbs": 6,
}


def substream(seed: int, block: int, role: str) -> np.random.Generator:
    """Generator for one (seed, block, role) triple."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block), ROLES[role]))
    return np.random.Generator(np.random.PCG64(ss))


def blocks(n: int, block_size: int = BLOCK_SIZE):
    """Yield ``(block_index, start, stop)`` covering ``range(n)``."""
    for b, start in enumerate(range(0, n, block_size)):
        yield b, start, min(start + block_size, n)
