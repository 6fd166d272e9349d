"""Counter-based random streams.

Every random quantity is drawn from a numpy Philox-4x64-10 generator keyed
by (master seed, replication, channel). The configuration cell is *not*
part of the key, so sweeps over persistence or slope reuse the same
innovations (common random numbers).
"""
from enum import IntEnum

import numpy as np

GENERATOR_NAME = "numpy.random.Philox(4x64-10)+SeedSequence"


class Channel(IntEnum):
    DATA = 0       # innovation base draws
    BOOT = 1       # bootstrap multipliers / resampling indices
    REFERENCE = 2  # limit-distribution paths
    AUX = 3        # anything else (e.g. FCLT check series)


def substream(seed, rep=0, channel=Channel.DATA):
    """Independent generator for one (replication, channel) pair."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(rep), int(channel)))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(stream):
    """Accept a Generator, an int seed, or None (fresh entropy)."""
    if isinstance(stream, np.random.Generator):
        return stream
    if stream is None or isinstance(stream, (int, np.integer)):
        return np.random.Generator(np.random.Philox(stream))
    raise TypeError(f"not a random stream: {stream!r}")
