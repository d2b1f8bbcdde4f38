"""Named deterministic random substreams derived from one run seed.

Every source of randomness in the package (simulation, parameter init,
shuffling) pulls its own generator via :func:`substream`, so changing one
consumer never perturbs another and reruns are bit-identical.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """A PCG64 generator keyed by (seed, name)."""
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))
