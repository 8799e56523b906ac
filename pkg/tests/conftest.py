"""Shared synthetic dataset builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

import ssjoin as sj


def make_pair(inter: int, a_extra: int, b_extra: int, base: int = 0):
    """Two records with |a ∩ b| = inter and the given disjoint tails.

    Jaccard similarity is exactly inter / (inter + a_extra + b_extra).
    """
    shared = base + np.arange(inter)
    a = np.concatenate([shared, base + inter + np.arange(a_extra)])
    b = np.concatenate([shared, base + inter + a_extra + np.arange(b_extra)])
    return sj.make_record(a), sj.make_record(b)


def random_rows(rng: np.random.Generator, n: int, universe: int, min_size=3, max_size=20):
    return [
        rng.choice(universe, size=int(rng.integers(min_size, max_size + 1)), replace=False)
        for _ in range(n)
    ]


def clustered_rows(rng, n_clusters: int, cluster_size: int, record_size=10, base=1_000_000):
    """Groups of near-duplicates: high pairwise similarity within a cluster."""
    rows = []
    for c in range(n_clusters):
        core = base + c * 10_000 + np.arange(record_size)
        rows.append(core)
        for m in range(cluster_size - 1):
            mutated = core.copy()
            mutated[m % record_size] = base + c * 10_000 + 5000 + m
            rows.append(mutated)
    return rows


def mixed_dataset(rng, n_random: int, n_clusters: int, universe=2000) -> sj.Dataset:
    """Random background plus similar clusters; exercises both join regimes."""
    rows = random_rows(rng, n_random, universe)
    rows.extend(clustered_rows(rng, n_clusters, cluster_size=4))
    return sj.Dataset.from_records(rows)


def planted_dataset(
    seed: int,
    n: int = 10_000,
    n_pairs: int = 500,
    threshold: float = 0.5,
    spread: float = 0.2,
    background_size: int = 5,
    pair_size_range=(6, 12),
) -> sj.Dataset:
    """Low-similarity background plus pairs planted at J in [threshold, threshold+spread].

    Planted pairs use dedicated token ranges, so the exact join of the
    result is (with overwhelming probability) exactly the planted pairs.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n - 2 * n_pairs):
        rows.append(rng.choice(2_000_000, size=background_size, replace=False))
    base = 4_000_000
    for i in range(n_pairs):
        target = threshold + rng.uniform(0.0, spread)
        s = int(rng.integers(pair_size_range[0], pair_size_range[1] + 1))
        # J = o / (2s - o)  =>  o = J * 2s / (1 + J), rounded up into [1, s-1]
        o = min(s - 1, max(1, int(np.ceil(target * 2 * s / (1 + target)))))
        tokens = base + i * 1000 + np.arange(2 * s - o)
        rows.append(tokens[:s])
        rows.append(np.concatenate([tokens[:o], tokens[s:]]))
    return sj.Dataset.from_records(rows)


def zipf_dataset(
    seed: int,
    n: int = 5000,
    universe: int = 30_000,
    zipf_a: float = 1.05,
    min_size: int = 100,
    max_size: int = 140,
    n_planted: int = 200,
) -> sj.Dataset:
    """Heavy-tailed token frequencies with large records; prefix filtering floods here."""
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n - 2 * n_planted):
        size = int(rng.integers(min_size, max_size + 1))
        tokens = np.unique(rng.zipf(zipf_a, size=size * 2) % universe)
        if tokens.size > size:
            tokens = rng.choice(tokens, size=size, replace=False)
        rows.append(tokens)
    base = 10_000_000
    for i in range(n_planted):
        target = 0.5 + rng.uniform(0.0, 0.2)
        s = int(rng.integers(min_size, max_size + 1))
        o = min(s - 1, max(1, int(np.ceil(target * 2 * s / (1 + target)))))
        tokens = base + i * 1000 + np.arange(2 * s - o)
        rows.append(tokens[:s])
        rows.append(np.concatenate([tokens[:o], tokens[s:]]))
    return sj.Dataset.from_records(rows)


@pytest.fixture
def tiny_dataset() -> sj.Dataset:
    return sj.parse_dataset("1 2 3\n2 3 4\n10 11 12 13\n10 11 12 14\n")
