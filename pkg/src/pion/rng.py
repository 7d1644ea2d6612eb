"""Deterministic pseudo-random number generation.

All synthetic data in this package flows through :class:`Rng`, a
xoshiro256** generator seeded from a single 64-bit integer via splitmix64.
The generator, the seeding procedure, and the normal-variate recipe below
are fully specified so that a given seed reproduces the same bit stream on
any platform:

* state: four 64-bit words, filled with four consecutive splitmix64 outputs
  of the seed;
* uniforms: the top 53 bits of each output word, scaled by 2**-53, shifted
  into (0, 1] by adding one ulp before scaling;
* normals: Box-Muller on consecutive uniform pairs (u1, u2), emitting
  sqrt(-2 ln u1) cos(2 pi u2) then sqrt(-2 ln u1) sin(2 pi u2).
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64_fill(seed: int, n: int) -> list[int]:
    """Return the first n outputs of splitmix64 started at ``seed``."""
    state = seed & _MASK64
    out = []
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        out.append(z ^ (z >> 31))
    return out


class Rng:
    """xoshiro256** stream with uniform and Gaussian helpers."""

    def __init__(self, seed: int):
        s = _splitmix64_fill(int(seed), 4)
        # splitmix64 cannot emit four zero words for any seed, so the
        # xoshiro state is never all-zero.
        self._s = tuple(s)

    def _raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit words as a uint64 array."""
        s0, s1, s2, s3 = self._s
        out = [0] * n
        for i in range(n):
            r = (s1 * 5) & _MASK64
            r = (((r << 7) | (r >> 57)) & _MASK64) * 9 & _MASK64
            out[i] = r
            t = (s1 << 17) & _MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._s = (s0, s1, s2, s3)
        return np.array(out, dtype=np.uint64)

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles in (0, 1]."""
        bits = self._raw(n) >> np.uint64(11)
        return (bits.astype(np.float64) + 1.0) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        """``n`` standard normal doubles via Box-Muller pairs."""
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        u1, u2 = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def normal_matrix(self, rows: int, cols: int, scale: float = 1.0) -> np.ndarray:
        """A rows-by-cols matrix of N(0, scale**2) entries, filled row-major."""
        return (scale * self.normal(rows * cols)).reshape(rows, cols)
