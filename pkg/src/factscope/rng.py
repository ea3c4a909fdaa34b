"""SplitMix64: a small, portable, counter-addressable generator.

State is one 64-bit word. Each step adds the golden-ratio increment
``0x9E3779B97F4A7C15`` to the state (mod 2**64) and returns the finalizer
``mix64`` of the new state. The k-th output (k = 0, 1, ...) of a stream
seeded with ``s`` is therefore ``mix64(s + (k + 1) * GAMMA)``, which lets a
whole block of draws be produced at once with numpy.

Bounded integers use the upper 32 bits: ``index(n) = ((x >> 32) * n) >> 32``
for ``1 <= n < 2**32``.

Independent streams come from ``derive_seed(seed, *keys)``: starting at
``h = seed mod 2**64``, each key folds in as ``h = mix64((h ^ key) + GAMMA)``.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    h = seed & MASK64
    for key in keys:
        h = mix64(((h ^ (key & MASK64)) + GAMMA) & MASK64)
    return h


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def index(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if not 1 <= n < 1 << 32:
            raise ValueError("n must be in [1, 2**32)")
        return ((self.next_u64() >> 32) * n) >> 32

    def block(self, count: int) -> np.ndarray:
        """The next ``count`` outputs as a uint64 array; advances the stream."""
        k = np.arange(1, count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + k * np.uint64(GAMMA)
        self.state = (self.state + count * GAMMA) & MASK64
        return mix64_array(states)

    def indices(self, n: int, count: int) -> np.ndarray:
        return bounded(self.block(count), n)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z ^= z >> np.uint64(30)
        z *= np.uint64(_M1)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_M2)
        z ^= z >> np.uint64(31)
    return z


def bounded(raw: np.ndarray, n) -> np.ndarray:
    """Vectorised ``index``; ``n`` may be a scalar or broadcastable array."""
    return ((raw >> np.uint64(32)) * np.asarray(n, dtype=np.uint64)) >> np.uint64(32)
