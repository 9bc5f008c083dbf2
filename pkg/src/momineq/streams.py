"""Deterministic random-stream derivation.

All randomness in the package flows from a single master seed.  Substreams
are derived through ``numpy.random.SeedSequence`` spawn keys, which gives
independent, reproducible streams addressable by an integer path: stream
``(seed, a, b, ...)`` is the same on every platform and does not depend on
how many other streams were created before it.  Parallel workers can
therefore draw from per-index streams and still reproduce the single-thread
run bit for bit.

Path tags used across the package (first path component):
``0`` simulated data, ``1`` bootstrap ensembles, ``2`` wbar estimation,
``3`` the kappa scan, ``4`` per-replicate test seeds, ``5`` CLI data
simulation.  The second component is typically a replicate index.
"""

from __future__ import annotations

import numpy as np

TAG_DATA = 0
TAG_ENSEMBLE = 1
TAG_WBAR = 2
TAG_SCAN = 3
TAG_TEST = 4
TAG_CLI_DATA = 5


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Return a generator on the independent stream keyed by ``path``."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(master_seed: int, *path: int) -> int:
    """Collapse ``(master_seed, path)`` into a stable nonnegative int seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(path))
    return int(ss.generate_state(1, np.uint64)[0] >> 1)
