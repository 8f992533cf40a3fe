"""Deterministic pseudo-random utilities shared by the pipeline.

Everything stochastic in this package (splits, weight init, augmentation,
phantom synthesis) draws from a SplitMix64 stream so results are identical
across platforms, Python versions, and numpy versions.  SplitMix64 is a
bijection on 64-bit ints, which also makes derived seeds collision-free
whenever the mixed inputs are distinct.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

# Rotation amounts for the (epoch, index) lanes of derive_seed.  Distinct
# rotations keep small epochs/indices in disjoint bit ranges, so the mixed
# pre-images (and therefore the derived seeds) are distinct.
EPOCH_ROT = 24
INDEX_ROT = 48


def splitmix64(state: int) -> int:
    """One SplitMix64 output for the given 64-bit state."""
    z = (state + _GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def rotl64(value: int, amount: int) -> int:
    value &= _MASK64
    amount %= 64
    return ((value << amount) | (value >> (64 - amount))) & _MASK64


def derive_seed(global_seed: int, epoch: int, index: int) -> int:
    """Per-sample 64-bit seed: SplitMix64 of the rotated-XOR of the triple."""
    mixed = (global_seed & _MASK64) ^ rotl64(epoch, EPOCH_ROT) ^ rotl64(index, INDEX_ROT)
    return splitmix64(mixed)


class SplitMix64(object):
    """Sequential SplitMix64 generator with the sampling helpers we need."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64
        self._spare_gauss: float | None = None

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = _MASK64 - (_MASK64 + 1) % n
        while True:
            u = self.next_u64()
            if u <= limit:
                return u % n

    def gauss(self) -> float:
        """Standard normal via Box-Muller (pairs cached)."""
        if self._spare_gauss is not None:
            value = self._spare_gauss
            self._spare_gauss = None
            return value
        # u1 in (0, 1] so log() is finite.
        u1 = 1.0 - self.random()
        u2 = self.random()
        radius = math.sqrt(-2.0 * math.log(u1))
        self._spare_gauss = radius * math.sin(2.0 * math.pi * u2)
        return radius * math.cos(2.0 * math.pi * u2)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]


def _mix_u64_array(states: np.ndarray) -> np.ndarray:
    z = states
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def u64_array(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Vectorized SplitMix64 stream: identical to count sequential draws.

    ``u64_array(seed, n)[k]`` equals the (offset+k+1)-th ``next_u64()`` of
    ``SplitMix64(seed)``.
    """
    steps = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    states = np.uint64(seed & _MASK64) + steps * np.uint64(_GAMMA)
    return _mix_u64_array(states)


def uniform_array(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Vectorized uniforms in [0, 1), float64."""
    return (u64_array(seed, count, offset) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def normal_array(seed: int, shape) -> np.ndarray:
    """Standard-normal array via Box-Muller over the SplitMix64 stream.

    Deterministic given (seed, shape); used for weight initialization.
    """
    n = int(np.prod(shape)) if shape else 1
    pairs = (n + 1) // 2
    u = uniform_array(seed, 2 * pairs)
    u1 = 1.0 - u[:pairs]  # in (0, 1], keeps log() finite
    u2 = u[pairs:]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:n]
    return out.reshape(shape)
