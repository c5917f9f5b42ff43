"""Inline xoshiro256** generator for numba kernels.

numba's own ``np.random`` uses a process-global state, which makes replica
reproducibility depend on call order.  Kernels here take an explicit 4-word
state array instead, seeded from a ``numpy.random.Generator``.
"""

import numpy as np
from numba import njit, uint64

_MASK = (1 << 64) - 1


def _splitmix64(x: int) -> tuple[int, int]:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return x, z ^ (z >> 31)


def make_state(rng: np.random.Generator) -> np.ndarray:
    """Fresh kernel RNG state drawn from ``rng``."""
    x = int(rng.integers(0, 2**63, dtype=np.int64))
    words = []
    for _ in range(4):
        x, z = _splitmix64(x)
        words.append(z)
    return np.array(words, dtype=np.uint64)


@njit(uint64(uint64, uint64), inline="always", cache=True)
def _rotl(x, k):
    return (x << k) | (x >> (uint64(64) - k))


@njit(inline="always", cache=True)
def next_u64(s):
    result = _rotl(s[1] * uint64(5), uint64(7)) * uint64(9)
    t = s[1] << uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], uint64(45))
    return result


@njit(inline="always", cache=True)
def uniform(s):
    """Float in [0, 1) with 53 random bits."""
    return (next_u64(s) >> uint64(11)) * (1.0 / 9007199254740992.0)
