"""Counter-based derivation of sub-seeds from a master seed.

Every random stream is keyed by ``(master_seed, stream_tag, *counters)``
through :class:`numpy.random.SeedSequence`, so no stream depends on how many
numbers another stream consumed or on execution order.
"""

from __future__ import annotations

import numpy as np

ERRORS = 1
PHASES = 2
NOISE = 3
SWEEP = 4
MONITOR = 5
CODEBOOK = 6


def derive_seed(master_seed: int, *keys: int) -> int:
    seq = np.random.SeedSequence([int(master_seed), *map(int, keys)])
    lo, hi = seq.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)
