"""Seeded random streams.

Every random draw in the package comes from a generator built off one
integer seed plus a tuple key naming the consumer, so that e.g. cohort
draws never share a stream with MCMC draws and parallel tasks do not
depend on scheduling order.
"""
import zlib

import numpy as np

# Stream tags. Only the integer values matter; keep them stable.
COHORT = 1
PATIENT = 2
OUTCOME = 3
INFERENCE = 4
PRIOR_DRAWS = 5
AUX = 6
PLATE = 7
BATCH = 8
HISTORICAL_DOSE = 9


def _word(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


def stream(seed, *key):
    """Return an independent ``numpy.random.Generator`` for ``(seed, *key)``."""
    if isinstance(seed, np.random.Generator):
        return seed
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_word(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive(seed, *key):
    """A plain integer seed for a sub-task, stable for ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_word(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
