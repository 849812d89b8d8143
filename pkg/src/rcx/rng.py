"""Named, independent random substreams.

Every stochastic stage derives its generator from (root seed, stage name,
optional indices) through SeedSequence, so adding draws to one stage never
shifts another stage's stream and runs reproduce byte-identically from the
single CLI seed.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, name: str, *indices: int) -> np.random.Generator:
    """Return the generator for stage `name` (plus per-item indices)."""
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence((seed, tag, *indices)))
