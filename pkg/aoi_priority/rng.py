# aoi_priority/rng.py
"""
Seed mixing and buffered exponential substreams.

One 64-bit base seed is expanded into independent substreams with a
splitmix64-style finalizer applied to (seed, substream index).
"""

import numpy as np

MASK64 = (1 << 64) - 1

ARRIVALS_1 = 0
ARRIVALS_2 = 1
SERVICE = 2


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix(seed: int, index: int) -> int:
    return splitmix64(splitmix64(seed & MASK64) ^ (index & MASK64))


class ExpStream:
    """Exponential draws from one substream, refilled a block at a time."""

    __slots__ = ("_rng", "_block", "_buf", "_pos")

    def __init__(self, seed: int, block: int = 4096):
        self._rng = np.random.default_rng(seed)
        self._block = block
        self._buf: list = []
        self._pos = 0

    def draw(self, rate: float) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._rng.standard_exponential(self._block).tolist()
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        return x / rate


def substream(seed: int, index: int) -> ExpStream:
    return ExpStream(mix(seed, index))
