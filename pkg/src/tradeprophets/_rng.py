"""Counter-based SplitMix64 streams.

Every trial owns a 64-bit seed derived from ``(master_seed, trial_index)``.
Draw ``n`` of a trial is ``mix64(seed + (n + 1) * GAMMA)``, so a trial's
prices depend only on its own seed: a batch can be split into chunks (or
workers) without changing any result, and a single episode replayed from
its seed reproduces the batch trial bit for bit.
"""

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def trial_seeds(master_seed, n, start=0):
    """Seeds of trials ``start .. start + n - 1`` under ``master_seed``."""
    base = mix64(np.array([int(master_seed) & _MASK], dtype=np.uint64))
    idx = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(base + idx * GAMMA)


def trial_seed(master_seed, index):
    return int(trial_seeds(master_seed, 1, start=index)[0])


def uniforms(seeds, count, start=0):
    """Draws ``start .. start + count - 1`` of each seed, shape ``(len(seeds), count)``, in ``[0, 1)``."""
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
    ctr = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = seeds[:, None] + ctr[None, :] * GAMMA
    return (mix64(z) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
