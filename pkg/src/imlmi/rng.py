"""Deterministic, order-independent random streams.

A :class:`Seed` is a master seed plus a label path.  Child streams are derived
by hashing the path into a ``numpy.random.SeedSequence`` spawn key, so the
stream for ``("replication", 7, "impute", 2)`` is the same no matter which
other streams were drawn before it or in which process.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

__all__ = ["Seed"]


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError("integer stream labels must be non-negative")
        return int(label)
    # strings are mapped above the 2**32 range so they never collide with indices
    return (1 << 32) + zlib.crc32(str(label).encode("utf-8"))


@dataclass(frozen=True)
class Seed:
    master: int
    path: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.master) < 2**64:
            raise ValueError("master seed must be a 64-bit unsigned integer")

    def child(self, *labels) -> "Seed":
        return Seed(self.master, self.path + tuple(labels))

    def sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            int(self.master), spawn_key=tuple(_label_key(x) for x in self.path)
        )

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.sequence()))

    def int_seed(self) -> int:
        """A 32-bit integer seed for code that cannot take a Generator."""
        return int(self.sequence().generate_state(1, np.uint32)[0])
