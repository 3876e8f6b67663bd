"""Counter-based random substreams.

Every random draw in the toolkit comes from a :class:`RngStream` addressed by
``(master seed, key path)``.  The generator behind a stream is Philox keyed
through :class:`numpy.random.SeedSequence`, so the numbers a replica sees
depend only on its address, never on execution order or thread count.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

_U64 = (1 << 64) - 1


def _key_part(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    part = int(part)
    if part < 0:
        raise ValueError(f"stream key components must be >= 0, got {part}")
    return part


@dataclass(frozen=True)
class RngStream:
    """Address of an independent random stream.

    Parameters
    ----------
    seed : int
        Master seed, reduced to 64 bits.
    key : tuple of int
        Path below the master seed.  Strings passed to :meth:`substream` are
        hashed to stable integers so stage names can be used directly.
    """

    seed: int
    key: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _U64)
        object.__setattr__(self, "key", tuple(_key_part(k) for k in self.key))

    def substream(self, *parts) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(_key_part(p) for p in parts))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))

    def describe(self) -> dict:
        return {"seed": self.seed, "key": list(self.key)}
