"""
Named random streams derived from one seed.

Each component draws from its own stream so that, for example, changing the
number of LIME samples never shifts the dropout masks of a training run.
"""

import zlib
from typing import Dict

import numpy as np

STREAMS = ("split", "sampling", "init", "dropout", "batches", "lime", "crossval")


class RngStreams:
    """Factory of independent numpy Generators keyed by stream name."""

    def __init__(self, seed: int):
        """
        Args:
            seed: Non-negative integer seed shared by every stream
        """
        if seed is None or int(seed) < 0:
            raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
        self.seed = int(seed)
        self._cache: Dict[str, np.random.Generator] = {}

    def stream(self, name: str) -> np.random.Generator:
        """Return the (cached) generator for `name`."""
        if name not in self._cache:
            self._cache[name] = self.fresh(name)
        return self._cache[name]

    def fresh(self, name: str) -> np.random.Generator:
        """Return a new generator for `name`, restarted from its initial state."""
        return np.random.default_rng([self.seed, zlib.crc32(name.encode("utf-8"))])

    def child(self, index: int) -> "RngStreams":
        """Streams for a sub-run (e.g. one cross-validation fold)."""
        return RngStreams(self.seed * 1000003 + int(index) + 1)
