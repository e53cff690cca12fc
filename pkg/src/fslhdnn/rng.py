"""Counter-based RNG keying.

All randomness in the library flows through Philox generators keyed by a
(seed, *stream ids) tuple, so results are reproducible and independent of
thread count or evaluation order.
"""

import numpy as np


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def keyed_rng(seed, *stream):
    """A numpy Generator keyed by (seed, *stream); same key, same stream."""
    k = _splitmix64(seed & 0xFFFFFFFFFFFFFFFF)
    for s in stream:
        k = _splitmix64(k ^ _splitmix64(s & 0xFFFFFFFFFFFFFFFF))
    key = np.array([k, _splitmix64(k)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
