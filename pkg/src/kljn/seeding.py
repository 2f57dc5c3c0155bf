"""Seed derivation shared by the simulator, protocol and attack campaigns.

All randomness comes from :class:`numpy.random.Generator` (PCG64).  Child
seeds are derived with :class:`numpy.random.SeedSequence` by spawn key, so
the seed of bit period ``i`` depends only on ``(master_seed, i)`` and
periods can be simulated in any order or in parallel.
"""

from __future__ import annotations

import numpy as np

# stream tags for the independent uses of one period seed
COIN_STREAM = 0xC0
CHOICE_STREAM = 0xA1


def derive_seed(master_seed: int, *path: int) -> int:
    """64-bit child seed of ``master_seed`` at spawn key ``path``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(p) for p in path))
    lo, hi = ss.generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Generator for one named stream of a seed."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(stream)))


def fair_coin(seed: int) -> bool:
    """Deterministic fair coin flip attached to a seed (used for withheld verdicts)."""
    return bool(rng_for(seed, COIN_STREAM).integers(2))
