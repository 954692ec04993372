"""Counter-style random substreams.

Each stream is keyed by a tuple of non-negative integers (for instance
``(seed, chain, iteration, block)``) so that draws do not depend on the
order in which other streams were consumed.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def substream(*key):
    """Return a ``Generator`` seeded deterministically from ``key``."""
    words = [int(k) & MASK64 for k in key]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))
