"""Portable seeded random numbers.

The generator is xorshift64* (Vigna 2016): state update
``x ^= x >> 12; x ^= x << 25; x ^= x >> 27`` followed by multiplication of
the output by 0x2545F4914F6CDD1D modulo 2**64.  Seeds are expanded with one
round of splitmix64 so that nearby integer seeds give unrelated streams and
the state is never zero.  Nothing here touches platform randomness, so a
seed reproduces the same stream on every machine.
"""

import math

import numpy as np

MASK64 = (1 << 64) - 1
XORSHIFT_MULT = 0x2545F4914F6CDD1D
SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
SPLITMIX_M1 = 0xBF58476D1CE4E5B9
SPLITMIX_M2 = 0x94D049BB133111EB


def splitmix64(x):
    z = (x + SPLITMIX_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * SPLITMIX_M1) & MASK64
    z = ((z ^ (z >> 27)) * SPLITMIX_M2) & MASK64
    return z ^ (z >> 31)


class XorShift64Star:
    def __init__(self, seed):
        state = splitmix64(int(seed) & MASK64)
        self._state = state or SPLITMIX_GAMMA

    def next_u64(self):
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self._state = x
        return (x * XORSHIFT_MULT) & MASK64

    def random(self):
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, lo, hi, size):
        n = int(np.prod(size))
        vals = np.fromiter((self.random() for _ in range(n)), dtype=np.float64, count=n)
        return (lo + (hi - lo) * vals).reshape(size)

    def normal(self, size):
        """Standard normals by the Box-Muller transform."""
        n = int(np.prod(size))
        out = np.empty(n)
        for i in range(0, n, 2):
            u1 = 1.0 - self.random()  # (0, 1]
            u2 = self.random()
            r = math.sqrt(-2.0 * math.log(u1))
            out[i] = r * math.cos(2.0 * math.pi * u2)
            if i + 1 < n:
                out[i + 1] = r * math.sin(2.0 * math.pi * u2)
        return out.reshape(size)

    def below(self, n):
        """Unbiased integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = MASK64 - (MASK64 + 1) % n
        while True:
            r = self.next_u64()
            if r <= limit:
                return r % n

    def permutation(self, n):
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return np.array(perm, dtype=np.int64)

    def sample(self, population, k):
        population = list(population)
        if k > len(population):
            raise ValueError("sample larger than population")
        idx = self.permutation(len(population))[:k]
        return [population[i] for i in idx]


def derive_seed(seed, tag):
    """Independent child seed for a named purpose, e.g. ``derive_seed(7, "init")``."""
    h = int(seed) & MASK64
    for ch in tag.encode():
        h = splitmix64(h ^ ch)
    return h
