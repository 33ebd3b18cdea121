"""Deterministic parallel random number streams.

Every stochastic routine in the package draws from a counter-based Philox
generator keyed by ``(master_seed, stream_index)``.  Distinct keys yield
statistically independent streams, and a stream's output depends only on its
key, never on execution order.  Normal variates come from numpy's ziggurat
sampler; this choice is fixed for reproducibility.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox

_MASK64 = (1 << 64) - 1


def substream(master_seed: int, index: int) -> Generator:
    """Generator for substream ``index`` of the family keyed by ``master_seed``."""
    key = np.array([master_seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return Generator(Philox(key=key))


def normal_rows(master_seed: int, n_rows: int, n_cols: int, row_offset: int = 0) -> np.ndarray:
    """Matrix of standard normals; row ``r`` comes from substream ``row_offset + r``."""
    out = np.empty((n_rows, n_cols))
    for r in range(n_rows):
        out[r] = substream(master_seed, row_offset + r).standard_normal(n_cols)
    return out


def derive_seed(*parts: int) -> int:
    """Collapse a tuple of integers into a fresh 64-bit master seed.

    Used to give each experiment grid point its own independent substream
    family while staying reproducible from the top-level seed.
    """
    state = np.random.SeedSequence([p & _MASK64 for p in parts]).generate_state(1, np.uint64)
    return int(state[0])


def chunk_ranges(total: int, chunk: int):
    """Yield (start, count) pairs covering range(total) in blocks."""
    start = 0
    while start < total:
        count = min(chunk, total - start)
        yield start, count
        start += count
