"""Seedable tabulation (Zobrist) hashing, MinHash, and 1-bit hash functions.

All randomness in the package flows through seeded PCG64 generators, so any
run is reproducible from its integer seed alone.  A tabulation hash maps a
32-bit key to 64 bits by XOR-ing one random table entry per key byte; it is
cheap, 3-independent, and strong enough for min-wise hashing in practice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bitops import MASK64

_NUM_TABLES = 4  # 32-bit keys split into four 8-bit characters
_TABLE_SIZE = 256
_TOKEN_SENTINEL = np.uint64(1) << np.uint64(32)  # larger than any 32-bit token


class RandomSource:
    """A deterministic random stream backed by PCG64.

    Identical seeds yield identical draw sequences on every platform (for a
    fixed numpy major version, which pins the generator algorithms).
    """

    __slots__ = ("seed", "gen")

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self.gen = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed})"


def batch_tables(count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` independent tabulation table sets, shape (count, 4, 256)."""
    return rng.integers(0, 1 << 64, size=(count, _NUM_TABLES, _TABLE_SIZE), dtype=np.uint64)


def _key_bytes(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    k = np.asarray(keys).astype(np.int64)
    return k & 0xFF, (k >> 8) & 0xFF, (k >> 16) & 0xFF, (k >> 24) & 0xFF


def tab_hash_many(tables: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Evaluate stacked tabulation hashes on shared keys.

    ``tables`` has shape (H, 4, 256); ``keys`` is a flat uint32 array of
    length m.  Returns the (H, m) uint64 hash matrix.
    """
    b0, b1, b2, b3 = _key_bytes(keys)
    # transposed contiguous levels turn the gathers into fast row copies
    levels = np.ascontiguousarray(tables.transpose(1, 2, 0))  # (4, 256, H)
    hv = levels[0][b0]
    hv ^= levels[1][b1]
    hv ^= levels[2][b2]
    hv ^= levels[3][b3]
    return hv.T


def tab_hash_rowwise(tables: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Evaluate hash i on row i of ``keys``.

    ``tables`` has shape (H, 4, 256); ``keys`` has shape (H, ...) with one
    key block per hash function.  Returns uint64 values of ``keys.shape``.
    """
    k = keys.astype(np.int64)
    rows = np.arange(tables.shape[0]).reshape((-1,) + (1,) * (k.ndim - 1))
    flat = np.ascontiguousarray(tables).reshape(-1)
    base = rows * (_NUM_TABLES * _TABLE_SIZE)
    out = flat.take(base + (k & 0xFF))
    out ^= flat.take(base + _TABLE_SIZE + ((k >> 8) & 0xFF))
    out ^= flat.take(base + 2 * _TABLE_SIZE + ((k >> 16) & 0xFF))
    out ^= flat.take(base + 3 * _TABLE_SIZE + ((k >> 24) & 0xFF))
    return out


@dataclass(frozen=True)
class TabulationHash:
    """One 32-bit -> 64-bit tabulation hash: four 256-entry uint64 tables."""

    tables: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.tables.shape != (_NUM_TABLES, _TABLE_SIZE):
            raise ValueError(f"tables must have shape (4, 256), got {self.tables.shape}")
        if self.tables.dtype != np.uint64:
            raise ValueError("tables must be uint64")

    @classmethod
    def from_seed(cls, seed: int) -> "TabulationHash":
        rng = RandomSource(seed).gen
        return cls(batch_tables(1, rng)[0])

    def __call__(self, key: int) -> int:
        t = self.tables
        h = int(t[0, key & 0xFF]) ^ int(t[1, (key >> 8) & 0xFF])
        h ^= int(t[2, (key >> 16) & 0xFF]) ^ int(t[3, (key >> 24) & 0xFF])
        return h

    def hash_array(self, keys: np.ndarray) -> np.ndarray:
        return tab_hash_many(self.tables[None, :, :], keys)[0]


def tab_hash(th: TabulationHash, key: int) -> int:
    """XOR of one table entry per byte of ``key``."""
    return th(key)


@dataclass(frozen=True)
class MinHashFn:
    """MinHash built on a tabulation hash: the token minimizing g(token).

    The value depends only on the token *set*; hash ties (vanishingly rare
    with 64-bit tabulation) resolve to the smallest token id so that runs
    are reproducible regardless of input order.
    """

    g: TabulationHash

    @classmethod
    def from_seed(cls, seed: int) -> "MinHashFn":
        return cls(TabulationHash.from_seed(seed))

    def __call__(self, tokens) -> int:
        tokens = np.asarray(tokens, dtype=np.uint32)
        if tokens.size == 0:
            raise ValueError("minhash of an empty record is undefined")
        hv = self.g.hash_array(tokens)
        return int(tokens[hv == hv.min()].min())


def minhash(h: MinHashFn, tokens) -> int:
    """Token of the set with the smallest base-hash value."""
    return h(tokens)


@dataclass(frozen=True)
class BitHashFn:
    """1-bit hash: the lowest bit of a full tabulation hash."""

    g1: TabulationHash

    @classmethod
    def from_seed(cls, seed: int) -> "BitHashFn":
        return cls(TabulationHash.from_seed(seed))

    def __call__(self, key: int) -> int:
        return self.g1(key) & 1


def bit_hash(b: BitHashFn, key: int) -> int:
    return b(key)


def minhash_many(tables: np.ndarray, tokens) -> np.ndarray:
    """MinHash of one token set under stacked hash functions.

    Returns a uint32 array of length ``tables.shape[0]`` holding, per hash
    function, the token that minimizes it (smallest token on ties).
    """
    tokens = np.asarray(tokens, dtype=np.uint32)
    if tokens.size == 0:
        raise ValueError("minhash of an empty record is undefined")
    hv = tab_hash_many(tables, tokens)  # (H, m)
    mins = hv.min(axis=1, keepdims=True)
    cand = np.where(hv == mins, tokens.astype(np.uint64)[None, :], _TOKEN_SENTINEL)
    return cand.min(axis=1).astype(np.uint32)


def minhash_csr(
    tables: np.ndarray,
    flat_tokens: np.ndarray,
    starts: np.ndarray,
    sizes: np.ndarray,
) -> np.ndarray:
    """MinHash every record of a CSR token layout under stacked functions.

    ``flat_tokens`` concatenates all records; record r occupies
    ``flat_tokens[starts[r]:starts[r]+sizes[r]]``.  Returns an (H, n) uint32
    matrix of minimizing tokens (smallest token on hash ties).
    """
    from ._kernels import minhash_into

    n = len(starts)
    out = np.empty((tables.shape[0], n), dtype=np.uint32)
    if n == 0:
        return out
    minhash_into(
        np.ascontiguousarray(tables).reshape(-1),
        flat_tokens,
        np.asarray(starts, dtype=np.int64),
        np.asarray(sizes, dtype=np.int64),
        out,
    )
    return out
