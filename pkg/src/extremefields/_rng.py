"""Deterministic stream derivation for replicated Monte Carlo work.

Every replicate gets its own generator derived from (master seed, index
path).  Results are therefore independent of batching, scheduling and
worker count: a replicate's stream never depends on who ran before it.
"""

from __future__ import annotations

import numpy as np


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, *key)``.

    ``key`` is typically a replicate index, possibly nested (experiment
    stage, replicate).  Identical arguments give bit-identical streams.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)
