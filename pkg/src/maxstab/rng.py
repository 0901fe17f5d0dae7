"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by
``(seed, *key)``.  Work split into replicates or fixed-size replicate
chunks derives its key from the replicate/chunk index, so results do not
depend on how the work is scheduled across threads.
"""

from __future__ import annotations

import numpy as np

# stream tags, kept distinct so that different consumers never share draws
GRID = 1
SITES = 2
PILOT = 3
LAGS = 4
SPECTRAL = 5
SYNTHETIC = 6
NORMALITY = 7
SITE_PICK = 8

# keys for FieldSimulator.sample_sites, one per estimator
THETA_KEY = 1
NU_KEY = 2
CZ_KEY = 3
COV_KEY = 4
CUBE_KEY = 5


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``key`` under master ``seed``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def zigzag(k: int) -> int:
    """Map an integer to a non-negative one (0, -1, 1, -2, ... -> 0, 1, 2, 3, ...),
    so that signed lag coordinates can be used in stream keys."""
    k = int(k)
    return 2 * k if k >= 0 else -2 * k - 1


def lag_key(tag: int, lag) -> tuple:
    return (tag,) + tuple(zigzag(k) for k in lag)
