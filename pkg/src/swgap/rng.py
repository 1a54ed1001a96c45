"""Reproducible random streams.

Every chain gets its own Philox stream derived from ``(seed, stream_id)``, so
parallel chains do not depend on scheduling order.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(seq))
