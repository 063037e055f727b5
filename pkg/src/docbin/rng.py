"""Portable seeded random streams for reproducible fixtures.

A 64-bit linear congruential generator with fixed constants drives
everything, so a given seed yields the same fixture on every platform.
Uniforms take the top 53 bits of the state; normals use Box-Muller on
consecutive uniform pairs.
"""

from __future__ import annotations

import numpy as np

MULTIPLIER = 6364136223846793005
INCREMENT = 1442695040888963407
_MASK = (1 << 64) - 1
_SCALE = 2.0 ** -53


class Lcg64:
    """``state <- state * MULTIPLIER + INCREMENT (mod 2**64)``.

    Each call returns values derived from successive *post-step* states.
    The bulk methods produce exactly the same stream as repeated scalar
    calls.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state * MULTIPLIER + INCREMENT) & _MASK
        return self.state

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * _SCALE

    def u64s(self, n: int) -> np.ndarray:
        """The next ``n`` states as a uint64 array (jump-ahead, no Python loop)."""
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        # A[j], C[j] compose j+1 steps: x -> A[j] * x + C[j]
        A = np.array([MULTIPLIER], dtype=np.uint64)
        C = np.array([INCREMENT], dtype=np.uint64)
        with np.errstate(over="ignore"):
            while A.size < n:
                a_m, c_m = A[-1], C[-1]
                A = np.concatenate([A, A * a_m])
                C = np.concatenate([C, A[:C.size] * c_m + C])
            A, C = A[:n], C[:n]
            out = A * np.uint64(self.state) + C
        self.state = int(out[-1])
        return out

    def uniforms(self, n: int) -> np.ndarray:
        return (self.u64s(n) >> np.uint64(11)).astype(np.float64) * _SCALE

    def normals(self, n: int) -> np.ndarray:
        """``n`` standard normal deviates; an odd tail discards its partner."""
        pairs = (n + 1) // 2
        u = self.uniforms(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log(1.0 - u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = r * np.cos(theta)
        z[:, 1] = r * np.sin(theta)
        return z.ravel()[:n]
