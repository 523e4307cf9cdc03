"""Deterministic 64-bit seed derivation.

All stochastic stages derive their generator seeds through one mixing
function so that any intermediate result can be regenerated from the
base seed and a handful of printed integers:

    derive_seed(base, *parts): s = base mod 2^64, then for each part
    s = splitmix64(s XOR (part mod 2^64)); the final s is the seed.

splitmix64 is the finalizer from Steele et al.'s SplittableRandom.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1

# role tags keep derivation paths for different purposes disjoint
ROLE_CAL = 0x0C01
ROLE_TEST = 0x7E57
ROLE_TRAIN = 0x7121
ROLE_LV_INIT = 0x1217
ROLE_LV_SHUFFLE = 0x5F0F
ROLE_LV_DATA = 0xDA7A


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(base: int, *parts: int) -> int:
    s = base & _MASK
    for part in parts:
        s = splitmix64(s ^ (part & _MASK))
    return s
