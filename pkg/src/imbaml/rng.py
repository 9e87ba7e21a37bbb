"""Seeded randomness with a stable child-stream derivation rule."""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 step; pure 64-bit integer math, platform independent."""
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


class Rng:
    """A named, reproducible random source (PCG64 behind numpy's Generator).

    Equal seeds produce equal streams on every platform. An instance is
    single-owner: code that needs concurrent randomness takes children via
    :meth:`child`, never a shared instance. The derivation rule is

        child_seed = splitmix64(parent_seed XOR splitmix64(child_index + 1))

    so sibling streams do not depend on the parent's draw position.
    """

    __slots__ = ("seed", "_gen")

    algorithm = "pcg64"

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    @property
    def np(self) -> np.random.Generator:
        """The underlying numpy Generator (stateful; draws advance it)."""
        return self._gen

    def child(self, index: int) -> "Rng":
        return Rng(splitmix64(self.seed ^ splitmix64((int(index) + 1) & _MASK64)))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed})"
