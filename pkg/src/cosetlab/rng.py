"""Seed handling.

Every stochastic routine in the package takes an explicit seed, so
parallel or re-ordered execution cannot change results.  ``subrng``
derives an independent generator from a master seed plus a tuple of
non-negative integer path components (role id, candidate index, trial
index, ...); the derivation is pure, so any unit of work can be
reproduced in isolation.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def subrng(master: int, *path: int) -> np.random.Generator:
    """Generator determined by (master, *path); path entries must be >= 0."""
    return np.random.default_rng(np.random.SeedSequence([int(master), *[int(p) for p in path]]))
