"""Deterministic random-number substreams.

All stochastic code in this package draws from Philox, a counter-based
64-bit generator, through :func:`substream`. Substreams are derived by
hashing ``(seed, *path)`` via :class:`numpy.random.SeedSequence`, so the
k-th frame of a batch gets the same bits no matter how many frames are
generated, in what order, or on how many threads.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return an independent generator for ``(seed, *path)``.

    Parameters
    ----------
    seed : int
        Top-level 64-bit seed (non-negative).
    *path : int
        Optional substream coordinates, e.g. a frame index. Distinct
        paths give statistically independent streams; the same path
        always reproduces the same stream.
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
