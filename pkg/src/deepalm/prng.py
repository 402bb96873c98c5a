"""Deterministic PRNG shared by every simulator in the package.

All synthetic data (traces, telemetry, log streams) flows through this one
generator so that a given seed reproduces the same bytes anywhere, including
in reimplementations in other languages. The core is xorshift64* (64-bit
state, Marsaglia triplet 12/25/27, odd multiplier 0x2545F4914F6CDD1D), seeded
through one round of splitmix64 so that small consecutive seeds do not yield
correlated streams.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_XORSHIFT_MULT = 0x2545F4914F6CDD1D


def _splitmix64(x: int) -> int:
    x = (x + _SPLITMIX_GAMMA) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class Xorshift64Star:
    """xorshift64* stream. State must never be zero; the seed is passed
    through splitmix64 and the one all-zero output is remapped."""

    def __init__(self, seed: int) -> None:
        state = _splitmix64(seed & _MASK64)
        self._state = state if state != 0 else _SPLITMIX_GAMMA

    def next_u64(self) -> int:
        x = self._state
        x ^= (x >> 12)
        x = (x ^ (x << 25)) & _MASK64
        x ^= (x >> 27)
        self._state = x
        return (x * _XORSHIFT_MULT) & _MASK64

    def uniform(self) -> float:
        """Uniform in [0, 1) with 53 bits of mantissa."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def gaussian(self, mean: float = 0.0, std: float = 1.0) -> float:
        """One Box-Muller draw. Consumes exactly two uniforms per call (the
        sine branch is discarded) so the stream position stays predictable."""
        u1 = ((self.next_u64() >> 11) + 1) * (2.0 ** -53)  # (0, 1]: log-safe
        u2 = self.uniform()
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return mean + std * z

    def exponential(self, rate: float) -> float:
        """Exponential inter-arrival gap with the given rate (per unit time)."""
        u = ((self.next_u64() >> 11) + 1) * (2.0 ** -53)
        return -math.log(u) / rate

    def randint(self, upper: int) -> int:
        """Integer in [0, upper) by rejection-free modulo (bias is irrelevant
        at the tiny ranges used for template rotation)."""
        return self.next_u64() % upper

    def fork(self) -> "Xorshift64Star":
        """Independent child stream; advances this stream by one draw."""
        return Xorshift64Star(self.next_u64())
