"""Seeded random streams.

Every stream is a Philox-4x64 counter-based generator keyed by a
``SeedSequence(seed, spawn_key=(stream,))``, so results depend only on the
(seed, stream) pair and reproduce across platforms and numpy versions that
keep Philox and SeedSequence stable.
"""

import numpy as np

# Stream identifiers. Distinct consumers never share a stream.
INIT = 1
SHUFFLE = 2
DATA = 3
AUDIT = 4


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))
