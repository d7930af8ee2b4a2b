"""Seeded RNG streams.

Every stochastic routine takes an integer seed and derives independent
substreams with ``stream(seed, *key)``.  Replication ``r`` of an experiment
always runs on its own stream, so replications are reproducible in any
execution order (serial or parallel).
"""

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for substream ``key`` of ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def child_seed(seed: int, *key: int) -> int:
    """Derive a child integer seed, e.g. one per replication."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
