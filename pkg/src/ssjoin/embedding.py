"""Randomized embedding of token sets into fixed-size MinHash vectors.

Each record maps to a length-t vector whose i-th entry is the i-th MinHash
of the record.  Two embedded records agree at position i exactly when the
i-th MinHash collides, so the fraction of agreeing positions estimates the
Jaccard similarity of the original sets (equal-size Braun-Blanquet
similarity on the embedded sets).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, Record
from .hashing import MinHashFn, RandomSource, TabulationHash, batch_tables, minhash_csr, minhash_many

DEFAULT_EMBEDDING_SIZE = 128

EmbeddedRecord = np.ndarray  # length-t uint32 vector of minimizing tokens


@dataclass(frozen=True)
class EmbeddingScheme:
    """t independent MinHash functions applied positionally."""

    tables: np.ndarray = field(repr=False)  # (t, 4, 256) uint64

    @property
    def t(self) -> int:
        return self.tables.shape[0]

    @classmethod
    def from_seed(cls, t: int = DEFAULT_EMBEDDING_SIZE, seed: int = 0) -> "EmbeddingScheme":
        if t < 1:
            raise ValueError("embedding size must be at least 1")
        return cls(batch_tables(t, RandomSource(seed).gen))

    @property
    def hashers(self) -> list[MinHashFn]:
        return [MinHashFn(TabulationHash(self.tables[i])) for i in range(self.t)]


def embed(scheme: EmbeddingScheme, record: Record) -> EmbeddedRecord:
    """values[i] = minhash_i(record); deterministic per (scheme, record)."""
    return minhash_many(scheme.tables, record)


def embed_all(scheme: EmbeddingScheme, dataset: Dataset) -> np.ndarray:
    """Embed every record; returns an (n, t) uint32 matrix."""
    return minhash_csr(scheme.tables, dataset.flat, dataset.starts, dataset.sizes).T.copy()


def bb_similarity(a: EmbeddedRecord, b: EmbeddedRecord) -> float:
    """Fraction of positions where the two embedded records agree."""
    if a.shape != b.shape:
        raise ValueError("embedded records must share the same size t")
    return float(np.count_nonzero(a == b)) / a.shape[0]
