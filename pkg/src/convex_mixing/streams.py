"""Counter-addressed random streams for replicate-parallel Monte Carlo.

Every stochastic driver in this package labels each random draw by a
coordinate triple (step, replicate, slot) and hashes it, together with a
master seed, through the splitmix64 finalizer.  The value consumed by
replicate i therefore never depends on how many other replicates run
alongside it, in which order chunks are scheduled, or how the work is
split across threads: identical (seed, step, replicate, slot) means an
identical draw, bit for bit.

This is the usual counter-mode construction: the packed coordinate acts
as the counter of one fixed-increment Weyl sequence and splitmix64 acts
as the output mixer, so random access into the stream costs the same as
sequential generation.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX_1 = _U64(0xBF58476D1CE4E5B9)
_MIX_2 = _U64(0x94D049BB133111EB)

# Packing limits for (step, replicate, slot) -> one 64-bit counter word.
MAX_STEPS = 1 << 26
MAX_REPLICATES = 1 << 26
MAX_SLOTS = 1 << 12


def _mix64(x):
    # splitmix64 finalizer; wraparound multiplication is the point here
    with np.errstate(over="ignore"):
        x = (x ^ (x >> _U64(30))) * _MIX_1
        x = (x ^ (x >> _U64(27))) * _MIX_2
    return x ^ (x >> _U64(31))


class CounterNoise:
    """Deterministic noise source addressed by (step, replicate, slot).

    Parameters
    ----------
    seed : int
        Master seed.  Any Python int; reduced mod 2**64.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        with np.errstate(over="ignore"):
            self._base = _mix64(_U64(self.seed % (1 << 64)) ^ _GOLDEN)

    def _words(self, step, replicates, slots):
        """Raw 64-bit words for one step, shape (len(replicates), len(slots))."""
        if step < 0 or step >= MAX_STEPS:
            raise ValueError(f"step {step} outside counter range")
        rep = np.asarray(replicates, dtype=np.uint64).reshape(-1, 1)
        slot = np.asarray(slots, dtype=np.uint64).reshape(1, -1)
        if rep.size and int(rep.max()) >= MAX_REPLICATES:
            raise ValueError("replicate index outside counter range")
        if slot.size and int(slot.max()) >= MAX_SLOTS:
            raise ValueError("slot index outside counter range")
        with np.errstate(over="ignore"):
            w = (_U64(step) * _U64(MAX_REPLICATES) + rep) * _U64(MAX_SLOTS) + slot
            return _mix64(self._base + w * _GOLDEN)

    def uniforms(self, step, replicates, slots):
        """Uniforms on (0, 1), shape (n_replicates, n_slots).

        `replicates` and `slots` are index arrays (or ints); the value at
        [i, j] depends only on (seed, step, replicates[i], slots[j]).
        """
        h = self._words(step, np.atleast_1d(replicates), np.atleast_1d(slots))
        return ((h >> _U64(11)).astype(np.float64) + 0.5) * 2.0**-53

    def normals(self, step, replicates, slots):
        """Standard normals, shape (n_replicates, n_slots), via inverse CDF."""
        return ndtri(self.uniforms(step, replicates, slots))


def as_noise(source) -> CounterNoise:
    """Coerce an int seed or an existing CounterNoise to a CounterNoise."""
    if isinstance(source, CounterNoise):
        return source
    if isinstance(source, (int, np.integer)):
        return CounterNoise(int(source))
    raise TypeError(f"expected integer seed or CounterNoise, got {type(source).__name__}")
