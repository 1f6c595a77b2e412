"""Portable deterministic pseudo-randomness.

Every shuffle, split, and random draw in this package comes from the
splitmix64 generator, evaluated in counter form so the stream is a pure
function of (seed, index):

    state   = (seed + (index + 1) * 0x9E3779B97F4A7C15)  mod 2**64
    z       = (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9  mod 2**64
    z       = (z ^ (z >> 27)) * 0x94D049BB133111EB          mod 2**64
    value   = z ^ (z >> 31)

The three constants are the published splitmix64 ones, so any language can
reproduce the stream exactly.  Derived conventions used throughout:

* shuffles are sort-based: index i gets key ``value(seed, i)`` and the
  permutation is the stable argsort of the keys;
* bounded draws use ``value % n`` (modulo bias < n / 2**64, negligible);
* sub-stream seeds (per epoch, per rubric) are single stream values.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64(0xFFFFFFFFFFFFFFFF)

# FNV-1a 64-bit, used to hash strings and tokens into the 64-bit space.
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix(state: np.ndarray) -> np.ndarray:
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def values(seed: int, start: int, count: int) -> np.ndarray:
    """Stream values value(seed, start) .. value(seed, start+count-1) as uint64."""
    idx = np.arange(start, start + count, dtype=np.uint64)
    state = (np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + (idx + np.uint64(1)) * _GOLDEN) & _U64
    with np.errstate(over="ignore"):
        return _mix(state)


def value(seed: int, index: int) -> int:
    """Single stream value, also used to derive sub-stream seeds."""
    return int(values(seed, index, 1)[0])


def permutation(seed: int, n: int) -> np.ndarray:
    """Deterministic permutation of range(n): stable argsort of the key stream."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return np.argsort(values(seed, 0, n), kind="stable")


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def seed_from_string(text: str) -> int:
    """Stable 64-bit seed for a label such as 'student|problem|hash'."""
    return fnv1a64(text.encode("utf-8"))


class PortableRng:
    """Sequential view of the splitmix64 counter stream."""

    def __init__(self, seed: int):
        self.seed = seed & 0xFFFFFFFFFFFFFFFF
        self._index = 0

    def next_u64(self) -> int:
        out = value(self.seed, self._index)
        self._index += 1
        return out

    def below(self, n: int) -> int:
        """Uniform int in [0, n) via the documented modulo rule."""
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def choice(self, seq):
        if not seq:
            raise ValueError("cannot choose from an empty sequence")
        return seq[self.below(len(seq))]

    def uniform(self) -> float:
        """Float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))
