"""1-bit minwise sketches and the calibrated similarity pre-filter.

A sketch packs 64*ell bits, bit i being a 1-bit hash of the record's i-th
MinHash.  Two records with Jaccard similarity J agree on each bit with
probability (1+J)/2, so the matching-bit count estimates J.  The pass
threshold is the largest matching-bit count m such that a pair at exactly
the join threshold is rejected with probability at most delta; it is
computed on integer bit counts from the exact binomial tail, never from a
normal approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .bitops import pack_bits, popcount
from .dataset import Dataset, Record, check_threshold
from .hashing import RandomSource, batch_tables, minhash_csr, minhash_many

DEFAULT_SKETCH_WORDS = 8

Sketch = np.ndarray  # ell uint64 words, 64*ell sketch bits


@dataclass(frozen=True)
class SketchScheme:
    """64*ell MinHash functions paired with 64*ell 1-bit hashes."""

    minhash_tables: np.ndarray = field(repr=False)  # (64*ell, 4, 256)
    bit_tables: np.ndarray = field(repr=False)      # (64*ell, 4, 256)

    @property
    def ell(self) -> int:
        return self.minhash_tables.shape[0] // 64

    @property
    def nbits(self) -> int:
        return self.minhash_tables.shape[0]

    @classmethod
    def from_seed(cls, ell: int = DEFAULT_SKETCH_WORDS, seed: int = 0) -> "SketchScheme":
        if ell < 1:
            raise ValueError("sketch length must be at least one 64-bit word")
        rng = RandomSource(seed).gen
        return cls(batch_tables(64 * ell, rng), batch_tables(64 * ell, rng))


def _bits_from_minhashes(scheme: SketchScheme, mh: np.ndarray) -> np.ndarray:
    """Low bit of the positional 1-bit hash of each MinHash value."""
    from ._kernels import bits_rowwise_into

    keys = mh.reshape(scheme.nbits, -1)
    out = np.empty(keys.shape, dtype=np.uint8)
    bits_rowwise_into(np.ascontiguousarray(scheme.bit_tables).reshape(-1), keys, out)
    return out.reshape(mh.shape)


def build_sketch(scheme: SketchScheme, record: Record) -> Sketch:
    """bit i = bit_hash_i(minhash_i(record)), packed into uint64 words."""
    mh = minhash_many(scheme.minhash_tables, record)
    return pack_bits(_bits_from_minhashes(scheme, mh))


def build_all_sketches(scheme: SketchScheme, dataset: Dataset) -> np.ndarray:
    """Sketch every record; returns an (n, ell) uint64 matrix."""
    mh = minhash_csr(scheme.minhash_tables, dataset.flat, dataset.starts, dataset.sizes)
    bits = _bits_from_minhashes(scheme, mh)  # (nbits, n)
    return pack_bits(bits.T)


def matching_bits(a: Sketch, b: Sketch) -> int:
    """Number of agreeing bit positions: total bits minus XOR popcount."""
    if a.shape != b.shape:
        raise ValueError("sketches must have the same length")
    return 64 * a.shape[0] - int(popcount(a ^ b).sum())


def estimate_similarity(a: Sketch, b: Sketch) -> float:
    """1-bit minwise similarity estimate, clamped at zero.

    With matching fraction p, returns max(0, 2p - 1); per-bit collision
    probability is (1 + J)/2 for true similarity J.
    """
    nbits = 64 * a.shape[0]
    return max(0.0, 2.0 * matching_bits(a, b) / nbits - 1.0)


def log_binomial_pmf(k: int, n: int, p: float) -> float:
    """log P[X = k] for X ~ Binomial(n, p)."""
    return (
        math.lgamma(n + 1)
        - math.lgamma(k + 1)
        - math.lgamma(n - k + 1)
        + k * math.log(p)
        + (n - k) * math.log1p(-p)
    )


def binomial_cdf(k: int, n: int, p: float) -> float:
    """P[X <= k] for X ~ Binomial(n, p), by compensated term summation.

    Each term is evaluated in log space first, which keeps the far tail
    accurate where the direct pmf recurrence would underflow.
    """
    if k < 0:
        return 0.0
    if k >= n:
        return 1.0
    total = 0.0
    comp = 0.0  # Neumaier compensation
    for i in range(k + 1):
        term = math.exp(log_binomial_pmf(i, n, p))
        s = total + term
        if abs(total) >= abs(term):
            comp += (total - s) + term
        else:
            comp += (term - s) + total
        total = s
    return min(1.0, total + comp)


@dataclass(frozen=True)
class PassThreshold:
    """Minimum matching-bit count a candidate pair must reach to be verified.

    For X ~ Binomial(nbits, (1+threshold)/2):
    P[X < min_matching_bits] <= delta and P[X < min_matching_bits + 1] > delta.
    """

    min_matching_bits: int
    threshold: float
    delta: float
    nbits: int


@lru_cache(maxsize=128)
def pass_threshold(threshold: float, delta: float, nbits: int) -> PassThreshold:
    """Largest m with BinomialCDF(m-1; nbits, (1+threshold)/2) <= delta."""
    check_threshold(threshold)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if nbits < 1:
        raise ValueError("nbits must be positive")
    p = (1.0 + threshold) / 2.0
    cdf = 0.0  # CDF(m - 1) at the top of each iteration
    comp = 0.0
    best = 0
    for m in range(nbits + 1):
        if cdf + comp <= delta:
            best = m
        else:
            break
        term = math.exp(log_binomial_pmf(m, nbits, p))
        s = cdf + term
        if abs(cdf) >= abs(term):
            comp += (cdf - s) + term
        else:
            comp += (term - s) + cdf
        cdf = s
    return PassThreshold(min_matching_bits=best, threshold=threshold, delta=delta, nbits=nbits)


def sketch_filter(a: Sketch, b: Sketch, thr: PassThreshold) -> bool:
    """True iff the pair's matching-bit count reaches the pass threshold."""
    return matching_bits(a, b) >= thr.min_matching_bits
