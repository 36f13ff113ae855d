"""Deterministic random substreams.

Every stochastic draw in a run comes from a generator keyed by
``(master seed, stream id, ...)``. Work items that may run on different
threads each own a key, so serial and parallel schedules see identical
numbers.
"""

from __future__ import annotations

import numpy as np

INIT = 0
VARIATION = 1
REPAIR = 2
FALLBACK = 3
SURROGATE = 4
INFILL = 5
SELECTION = 6
STALL = 7


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))
