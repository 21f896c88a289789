"""Random-number generation policy.

Every stochastic routine in the package derives its generator here.  The
generator is numpy's Philox (a counter-based generator), keyed directly by
the pair ``(master_seed, replication)`` as two 64-bit words.  The derivation
is a fixed, documented rule rather than entropy-pool spawning, so any
(seed, replication) pair reproduces bit-identical streams across platforms
and processes.
"""

from __future__ import annotations

import numpy as np


def generator(master_seed: int, replication: int = 0) -> np.random.Generator:
    """Philox generator keyed by (master_seed, replication)."""
    key = np.array([np.uint64(master_seed & (2**64 - 1)),
                    np.uint64(replication & (2**64 - 1))], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
