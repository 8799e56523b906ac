"""Bit-level helpers shared by the hashing, sketching, and join layers."""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# SplitMix64 finalizer constants (Steele, Lea & Flood's published generator).
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """SplitMix64 finalizer: a fast, well-mixed bijection on 64-bit integers."""
    z = (x + _GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_array(values: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64` over a uint64 array (wrapping arithmetic)."""
    z = values + np.uint64(_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def derive_seed(master: int, stream: int) -> int:
    """Decorrelated child seed for a numbered stream under one master seed.

    Bijective in ``stream`` for a fixed master, so distinct repetition
    indices can never be assigned the same child seed.
    """
    return mix64((master & MASK64) ^ mix64(stream & MASK64))


def popcount(words: np.ndarray) -> np.ndarray:
    """Per-element set-bit count of a uint64 array."""
    return np.bitwise_count(words)


_BIT_SHIFTS = np.arange(64, dtype=np.uint64)


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a (..., 64*w) array of 0/1 values into (..., w) uint64 words.

    Bit ``i`` of the flat input becomes bit ``i % 64`` of word ``i // 64``.
    """
    *lead, nbits = bits.shape
    if nbits % 64:
        raise ValueError("bit count must be a multiple of 64")
    shifted = bits.astype(np.uint64).reshape(*lead, nbits // 64, 64) << _BIT_SHIFTS
    return np.bitwise_or.reduce(shifted, axis=-1)


def pack_pairs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pack id pairs into sortable uint64 keys: ``a`` in the high 32 bits."""
    return (a.astype(np.uint64) << np.uint64(32)) | b.astype(np.uint64)


def unpack_pairs(packed: np.ndarray) -> list[tuple[int, int]]:
    """Inverse of :func:`pack_pairs`, as a list of (high, low) int tuples."""
    hi = (packed >> np.uint64(32)).astype(np.int64)
    lo = (packed & np.uint64(0xFFFFFFFF)).astype(np.int64)
    return list(zip(hi.tolist(), lo.tolist()))
