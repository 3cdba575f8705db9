"""Deterministic seed derivation for replicate ensembles.

Replicate k of an ensemble with base seed s uses the substream seed

    substream(s, k) = mix64((s + (k + 1) * GOLDEN) mod 2**64)

where GOLDEN = 0x9E3779B97F4A7C15 and mix64 is the splitmix64 output
permutation.  The same mixing function drives the engine's internal
uniform stream, so ensembles are reproducible across machines and across
any degree of parallel fan-out.
"""

from __future__ import annotations

import numpy as np

__all__ = ["GOLDEN", "mix64", "substream"]

GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def mix64(v: int) -> int:
    """splitmix64 output permutation of a 64-bit integer."""
    v &= _MASK
    v = ((v ^ (v >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    v = ((v ^ (v >> 27)) * 0x94D049BB133111EB) & _MASK
    return (v ^ (v >> 31)) & _MASK


def substream(base_seed: int, index: int) -> int:
    """Seed for replicate ``index`` derived from ``base_seed``."""
    if index < 0:
        raise ValueError("replicate index must be nonnegative")
    return mix64((int(base_seed) + (index + 1) * GOLDEN) & _MASK)


def uniform_stream(seed: int):
    """Pure-python splitmix64 uniform generator (reference for tests)."""
    state = int(seed) & _MASK

    def nxt() -> float:
        nonlocal state
        state = (state + GOLDEN) & _MASK
        return (mix64(state) >> 11) * (1.0 / 9007199254740992.0)

    return nxt


def numpy_rng(seed: int, index: int | None = None) -> np.random.Generator:
    """numpy Generator seeded directly or from a derived substream."""
    if index is not None:
        seed = substream(seed, index)
    return np.random.default_rng(seed)
