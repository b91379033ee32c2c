"""Deterministic random stream used by shape search and dataset splitting.

Everything downstream (golden tests, checkpoint reproducibility, parallel
worker slots) depends on this stream being identical across platforms and
library versions, so the generator is implemented here instead of relying
on ``random`` or numpy whose sequences are not pinned forever.
"""

from __future__ import annotations

import math

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_TWO53 = float(1 << 53)


def _mix64(z: int) -> int:
    """SplitMix64 finalizer: avalanche one 64-bit word."""
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *indices: int) -> int:
    """Combine a base seed with indices into an independent child seed.

    Used to give every (shape step, worker slot) and every dataset image its
    own stream, so results do not depend on evaluation order.
    """
    s = _mix64(seed & _MASK64)
    for ix in indices:
        s = _mix64((s ^ ((ix & _MASK64) * _GOLDEN & _MASK64)) & _MASK64)
    return s


class RandomStream:
    """SplitMix64 sequence with the few draw kinds the fitter needs."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix64(self._state)

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) / _TWO53

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive.

        Uses modulo reduction; the bias is < 2**-32 for any span this
        library draws and irrelevant next to determinism.
        """
        return lo + self.next_u64() % (hi - lo + 1)

    def sign(self) -> int:
        """Uniform choice of -1 or +1."""
        return 1 if (self.next_u64() >> 63) else -1

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Box-Muller normal draw (two uniforms consumed, cosine branch)."""
        u1 = ((self.next_u64() >> 11) + 1) / _TWO53
        u2 = (self.next_u64() >> 11) / _TWO53
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(math.tau * u2)

    def spawn(self, *indices: int) -> "RandomStream":
        return RandomStream(derive_seed(self._state, *indices))
