"""Self-contained random generator for reproducible session sampling.

A 64-bit-output permuted congruential generator (128-bit LCG state, XSL-RR
output) seeded through splitmix64, with Box-Muller normal draws. Keeping the
whole chain in plain integer arithmetic makes sampled scenarios byte-identical
across platforms and numpy versions, which the regression suite relies on.
"""

from __future__ import annotations

import math

__all__ = ["Pcg64"]

_MASK64 = (1 << 64) - 1
_MASK128 = (1 << 128) - 1
_PCG_MULT = 0x2360ED051FC65DA44385DF649FCCF645


def _splitmix64(state: int):
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


class Pcg64:
    """Deterministic uniform/normal source; one instance per sampling task."""

    def __init__(self, seed: int):
        s, hi = _splitmix64(seed & _MASK64)
        s, lo = _splitmix64(s)
        _, inc = _splitmix64(s)
        self._state = ((hi << 64) | lo) & _MASK128
        self._inc = ((inc << 1) | 1) & _MASK128  # increment must be odd
        self._spare_normal: float | None = None
        self.next_u64()  # decorrelate from the raw seed words

    def next_u64(self) -> int:
        self._state = (self._state * _PCG_MULT + self._inc) & _MASK128
        s = self._state
        rot = s >> 122
        xored = ((s >> 64) ^ s) & _MASK64
        return ((xored >> rot) | (xored << (64 - rot))) & _MASK64

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        if self._spare_normal is not None:
            z, self._spare_normal = self._spare_normal, None
            return mean + std * z
        u1 = 1.0 - self.uniform()  # (0, 1], keeps the log finite
        u2 = self.uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        self._spare_normal = radius * math.sin(2.0 * math.pi * u2)
        return mean + std * radius * math.cos(2.0 * math.pi * u2)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) without modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        threshold = (1 << 64) % n
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]
