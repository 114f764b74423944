"""Portable, seedable random streams.

Every random decision in the package goes through xorshift64* seeded by
SplitMix64, so a given seed yields the same stream in any language that
implements the two 64-bit recurrences below:

* ``splitmix64``: ``s += 0x9E3779B97F4A7C15``, output
  ``z = (s ^ s>>30) * 0xBF58476D1CE4E5B9; z = (z ^ z>>27) * 0x94D049BB133111EB; z ^ z>>31``.
* ``xorshift64*``: ``x ^= x>>12; x ^= x<<25; x ^= x>>27``, output
  ``x * 0x2545F4914F6CDD1D``.

Integers in ``[0, n)`` are ``((out >> 32) * n) >> 32``; unit floats are
``(out >> 11) * 2**-53``.
"""
from __future__ import annotations

import numba
import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_STAR = 0x2545F4914F6CDD1D


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a SplitMix64 state; return ``(new_state, output)``."""
    state = (state + _GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return state, z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Hash ``seed`` and integer ``keys`` into an independent 64-bit seed."""
    state, out = splitmix64(int(seed) & MASK64)
    for k in keys:
        state, out = splitmix64(out ^ (int(k) & MASK64))
    return out


class Xorshift64Star:
    """xorshift64* generator with SplitMix64 seeding."""

    def __init__(self, seed: int = 0):
        _, s = splitmix64(int(seed) & MASK64)
        self.state = s or _GOLDEN

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * _STAR) & MASK64

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def integers(self, n: int) -> int:
        if n <= 0 or n > 1 << 32:
            raise ValueError("n must be in [1, 2**32]")
        return ((self.next_u64() >> 32) * n) >> 32

    def state_array(self) -> np.ndarray:
        """Copy of the state as a 1-element uint64 array, for the jitted helpers."""
        return np.array([self.state], dtype=np.uint64)


@numba.njit(cache=True)
def nb_next_u64(state):
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return x * np.uint64(0x2545F4914F6CDD1D)


@numba.njit(cache=True)
def nb_integers(state, n):
    return np.int64(((nb_next_u64(state) >> np.uint64(32)) * np.uint64(n)) >> np.uint64(32))
