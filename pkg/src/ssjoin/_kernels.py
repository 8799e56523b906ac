"""Numba kernels for the hash-evaluation and verification hot paths.

Each kernel has a straightforward numpy counterpart elsewhere in the
package (per-record hashing in ``hashing``, set intersection in tests);
the kernels exist purely for speed and are cross-checked against those
counterparts in the test suite.
"""

from __future__ import annotations

import numba
import numpy as np
from numba import njit, prange

# fixed, portable threading layer; avoids probing optional backends
numba.config.THREADING_LAYER = "workqueue"

_TABLE_WORDS = 4 * 256  # one tabulation hash: 4 tables of 256 uint64 words


@njit(cache=True, parallel=True)
def minhash_into(tables_flat, flat_tokens, starts, sizes, out):
    """MinHash token of every record under every stacked hash function.

    ``tables_flat`` concatenates H tabulation table sets (H * 1024 words);
    ``out`` has shape (H, n).  Tokens within a record are sorted ascending,
    so keeping the first strict minimum implements the smallest-token tie
    rule exactly.
    """
    num_hashes = out.shape[0]
    n = out.shape[1]
    for r in prange(n):
        s = starts[r]
        e = s + sizes[r]
        for h in range(num_hashes):
            base = h * _TABLE_WORDS
            best = np.uint64(0)
            best_token = np.uint32(0)
            first = True
            for p in range(s, e):
                key = flat_tokens[p]
                value = (
                    tables_flat[base + np.int64(key & np.uint32(0xFF))]
                    ^ tables_flat[base + 256 + np.int64((key >> np.uint32(8)) & np.uint32(0xFF))]
                    ^ tables_flat[base + 512 + np.int64((key >> np.uint32(16)) & np.uint32(0xFF))]
                    ^ tables_flat[base + 768 + np.int64((key >> np.uint32(24)) & np.uint32(0xFF))]
                )
                if first or value < best:
                    best = value
                    best_token = key
                    first = False
            out[h, r] = best_token


@njit(cache=True)
def bits_rowwise_into(tables_flat, keys, out):
    """Low bit of tabulation hash i applied to row i of ``keys`` (H, n)."""
    num_hashes = keys.shape[0]
    n = keys.shape[1]
    for h in range(num_hashes):
        base = h * _TABLE_WORDS
        for c in range(n):
            key = keys[h, c]
            value = (
                tables_flat[base + np.int64(key & np.uint32(0xFF))]
                ^ tables_flat[base + 256 + np.int64((key >> np.uint32(8)) & np.uint32(0xFF))]
                ^ tables_flat[base + 512 + np.int64((key >> np.uint32(16)) & np.uint32(0xFF))]
                ^ tables_flat[base + 768 + np.int64((key >> np.uint32(24)) & np.uint32(0xFF))]
            )
            out[h, c] = np.uint8(value & np.uint64(1))


@njit(cache=True)
def intersect_sorted(a, b):
    """|a ∩ b| by a linear merge of two sorted unique arrays."""
    i = 0
    j = 0
    count = 0
    while i < a.size and j < b.size:
        ta = a[i]
        tb = b[j]
        if ta == tb:
            count += 1
            i += 1
            j += 1
        elif ta < tb:
            i += 1
        else:
            j += 1
    return count


@njit(cache=True)
def intersections_pairs(flat, starts, sizes, ids_a, ids_b, out):
    """Intersection size of record pairs in a CSR token layout."""
    for idx in range(ids_a.size):
        a = ids_a[idx]
        b = ids_b[idx]
        i = starts[a]
        i_end = i + sizes[a]
        j = starts[b]
        j_end = j + sizes[b]
        count = 0
        while i < i_end and j < j_end:
            ta = flat[i]
            tb = flat[j]
            if ta == tb:
                count += 1
                i += 1
                j += 1
            elif ta < tb:
                i += 1
            else:
                j += 1
        out[idx] = count
