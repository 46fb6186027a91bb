"""Seeded random streams.

Every stochastic stage draws from its own Philox stream keyed by the user
seed plus a small integer path (stage id, segment label). Philox is
counter-based, so a stream is fully determined by its key and the number of
draws already taken.
"""

import numpy as np

INIT_STREAM = 0
ANNEAL_STREAM = 1


def stream(seed, *path):
    """Return a ``numpy.random.Generator`` for ``seed`` and a stream path."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, label):
    """64-bit seed for a sub-problem, mixed from a base seed and a label."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(0xC0FFEE, int(label)))
    return int(ss.generate_state(1, np.uint64)[0])


def unit_uniform(raw):
    """Map raw 64-bit words to doubles in [0, 1) using the top 53 bits."""
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
