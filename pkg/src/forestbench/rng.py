"""Splittable, reproducible random streams.

Every stochastic component receives its own stream derived from a root seed
and a path of integer labels, so results never depend on execution order or
worker count.  Streams are backed by numpy's counter-based Philox generator
keyed through ``SeedSequence(seed, spawn_key=path)``.
"""

from __future__ import annotations

import numpy as np


class Rng:
    """Deterministic random stream addressed by (seed, label path)."""

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.path = _path
        self._gen = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=_path))
        )

    def split(self, label: int) -> "Rng":
        """Derive an independent stream; same (seed, labels) -> same stream."""
        return Rng(self.seed, self.path + (int(label),))

    def derive_seed(self, label: int) -> int:
        """A fresh 64-bit seed for a nested component, stable under splitting."""
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path + (int(label),))
        return int(ss.generate_state(1, np.uint64)[0])

    # Thin pass-throughs to the underlying generator.  Each call advances
    # this stream's state; split-off streams are unaffected.

    def random(self, size=None):
        return self._gen.random(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size=size)

    def permutation(self, x):
        return self._gen.permutation(x)

    def shuffle(self, x) -> None:
        self._gen.shuffle(x)

    def choice(self, a, size=None, replace=True):
        return self._gen.choice(a, size=size, replace=replace)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, path={self.path})"
