"""Named, reproducible random substreams derived from one root seed.

Every source of randomness in an experiment (task generation, network
initialisation, candidate draws, validation noise) pulls from its own
named substream so components can be varied independently while the
whole run stays replayable from a single integer.
"""

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(seed: int, name: str) -> np.random.Generator:
    """Return a generator for the ``name`` substream of ``seed``."""
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence((int(seed) & _MASK64, key)))
