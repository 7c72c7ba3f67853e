"""Deterministic, splittable random streams.

All randomness in the package flows through counter-based Philox generators.
The splitting rule is documented and fixed: a stream is addressed by a base
seed plus an integer path, and the 128-bit Philox key is obtained by folding
the path words through SplitMix64.  Identical (seed, path) always reproduces
the identical stream, independently of thread count or call order, so every
estimate is replayable bit for bit from its recorded (seed, N).
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def _fold(hi: int, lo: int, part: int) -> tuple[int, int]:
    hi = _splitmix64(hi ^ (part & _MASK))
    lo = _splitmix64(lo ^ _splitmix64(part & _MASK))
    return hi, lo


def _prefix(seed: int, *path: int) -> tuple[int, int]:
    hi = _splitmix64(seed & _MASK)
    lo = _splitmix64(hi ^ 0xD1B54A32D192ED03)
    for part in path:
        hi, lo = _fold(hi, lo, part)
    return hi, lo


def philox_key(seed: int, *path: int) -> np.ndarray:
    """Two 64-bit key words from a seed and an integer path."""
    hi, lo = _prefix(seed, *path)
    return np.array([hi, lo], dtype=np.uint64)


def stream(seed: int, *path: int) -> np.random.Generator:
    """The Philox stream addressed by (seed, path)."""
    return np.random.Generator(np.random.Philox(key=philox_key(seed, *path)))


class StreamFactory:
    """Fast source of the streams (seed, path, index) for index = 0, 1, ....

    `stream_at(i)` yields bit-identical values to `stream(seed, *path, i)`
    but reuses one bit generator, rekeyed through the state interface, which
    avoids the construction cost in tight Monte-Carlo loops.  Not thread-safe;
    use one factory per worker.
    """

    def __init__(self, seed: int, *path: int):
        self._hi, self._lo = _prefix(seed, *path)
        self._bg = np.random.Philox(key=np.zeros(2, dtype=np.uint64))
        self._gen = np.random.Generator(self._bg)
        self._template = self._bg.state

    def stream_at(self, index: int) -> np.random.Generator:
        hi, lo = _fold(self._hi, self._lo, index)
        st = self._template
        st["state"]["key"][0] = hi
        st["state"]["key"][1] = lo
        st["state"]["counter"][:] = 0
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bg.state = st
        return self._gen
