"""Baseline joins: MinHash LSH, exact prefix-filter join, and a naive oracle.

The LSH baseline buckets records by k concatenated MinHash values and
brute-forces each bucket, repeating L times; it shares the candidate
pipeline (sketch filter plus exact verification) with the recursive join.
The exact join uses prefix filtering over a global ascending-frequency
token order and is the ground-truth algorithm.  The naive join compares
every pair with plain Python set arithmetic and exists purely as an
independent testing oracle.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bitops import pack_pairs, unpack_pairs
from .cpsjoin import JoinOutcome, Metrics, PairPipeline
from .dataset import Dataset, check_threshold, required_overlap
from .hashing import RandomSource, batch_tables, minhash_csr
from .sketching import pass_threshold


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass
class LshParams:
    """MinHash LSH configuration.

    ``k=0`` asks for automatic tuning over k in 2..10; ``L=0`` derives the
    repetition count from the recall target.
    """

    threshold: float
    k: int = 0
    L: int = 0
    phi_target: float = 0.9
    seed: int = 1

    def __post_init__(self):
        check_threshold(self.threshold)
        if not (self.k == 0 or 1 <= self.k <= 32):
            raise ValueError("k must be 0 (auto) or in [1, 32]")
        if self.L < 0:
            raise ValueError("L must be non-negative")
        if not 0.0 < self.phi_target < 1.0:
            raise ValueError("phi_target must lie in (0, 1)")


def derive_L(threshold: float, k: int, phi_target: float) -> int:
    """Repetitions needed for recall phi when one round hits with prob threshold^k.

    Exactly ceil(ln(1/(1-phi)) / threshold^k), at least 1.
    """
    check_threshold(threshold)
    if not 0.0 < phi_target < 1.0:
        raise ValueError("phi_target must lie in (0, 1)")
    return max(1, math.ceil(math.log(1.0 / (1.0 - phi_target)) / threshold**k))


def _bucket_groups(minhashes: np.ndarray) -> list[np.ndarray]:
    """Group record ids sharing all k MinHash values (full-tuple equality)."""
    _, inverse = np.unique(minhashes.T, axis=0, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    sorted_inv = inverse[order]
    cuts = np.flatnonzero(sorted_inv[1:] != sorted_inv[:-1]) + 1
    bounds = np.concatenate(([0], cuts, [sorted_inv.size]))
    return [order[a:b] for a, b in zip(bounds[:-1], bounds[1:]) if b - a >= 2]


def splitting_cost(dataset: Dataset, k: int, rng: RandomSource) -> int:
    """Estimated cost of one LSH round at band length k from one splitting pass.

    Cost model: n*k for hashing and lookups plus sum over buckets of
    |B|*(|B|-1)/2 comparisons.
    """
    n = len(dataset)
    tables = batch_tables(k, rng.gen)
    mh = minhash_csr(tables, dataset.flat, dataset.starts, dataset.sizes)
    _, counts = np.unique(mh.T, axis=0, return_counts=True)
    return n * k + int((counts.astype(np.int64) * (counts - 1) // 2).sum())


def tune_k(dataset: Dataset, threshold: float, rng: RandomSource) -> int:
    """Pick k in 2..10 minimizing :func:`splitting_cost`; ties go to smaller k."""
    check_threshold(threshold)
    if len(dataset) == 0:
        raise ValueError("cannot tune k on an empty dataset")
    best_k = 2
    best_cost = None
    for k in range(2, 11):
        cost = splitting_cost(dataset, k, rng)
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best_k = k
    return best_k


def minhash_lsh_join(
    dataset: Dataset,
    params: LshParams,
    sketches: np.ndarray | None,
    rng: RandomSource | None = None,
    *,
    use_sketch_filter: bool = True,
    delta: float = 0.05,
) -> JoinOutcome:
    """LSH self-join: L rounds of bucketing by k concatenated MinHashes.

    Buckets of size >= 2 run through the shared brute-force pipeline; the
    union of all rounds is deduplicated.  ``sketches`` may be None only when
    the sketch filter is disabled.
    """
    if rng is None:
        rng = RandomSource(params.seed)
    start = time.perf_counter()
    metrics = Metrics()
    n = len(dataset)
    if n == 0:
        metrics.wall_time = time.perf_counter() - start
        return JoinOutcome(pairs=[], metrics=metrics)
    k = params.k or tune_k(dataset, params.threshold, rng)
    rounds = params.L or derive_L(params.threshold, k, params.phi_target)
    if use_sketch_filter and sketches is None:
        raise ValueError("sketches are required while the sketch filter is enabled")
    thr = None
    if use_sketch_filter:
        thr = pass_threshold(params.threshold, delta, 64 * sketches.shape[1])
    pipeline = PairPipeline(dataset, sketches, thr, params.threshold, metrics)
    for _ in range(rounds):
        tables = batch_tables(k, rng.gen)
        mh = minhash_csr(tables, dataset.flat, dataset.starts, dataset.sizes)
        for group in _bucket_groups(mh):
            pipeline.all_pairs(group.astype(np.int64))
    pairs = pipeline.finish()
    metrics.wall_time = time.perf_counter() - start
    return JoinOutcome(pairs=pairs, metrics=metrics)


def _frequency_ranks(dataset: Dataset) -> list[np.ndarray]:
    """Records re-encoded as ranks in ascending global token frequency.

    Rare tokens get small ranks; ties break on the token id so the order is
    total and deterministic.
    """
    distinct, counts = np.unique(dataset.flat, return_counts=True)
    order = np.lexsort((distinct, counts))
    rank_of = np.empty(distinct.size, dtype=np.uint32)
    rank_of[order] = np.arange(distinct.size, dtype=np.uint32)
    ranked = []
    for rec in dataset.records:
        r = rank_of[np.searchsorted(distinct, rec)]
        r.sort()
        ranked.append(r)
    return ranked


def exact_join(dataset: Dataset, threshold: float) -> JoinOutcome:
    """Complete self-join via prefix filtering; the ground-truth algorithm.

    Tokens are reordered by ascending global frequency; each record indexes
    its first |x| - ceil(threshold*|x|) + 1 tokens in inverted lists.
    Candidates are gathered from the prefix lists of each probe record,
    restricted to lower record ids, length-filtered, and exactly verified.
    All cutoffs are computed in exact integer arithmetic.
    """
    check_threshold(threshold)
    start = time.perf_counter()
    metrics = Metrics()
    n = len(dataset)
    if n == 0:
        metrics.wall_time = time.perf_counter() - start
        return JoinOutcome(pairs=[], metrics=metrics)

    from ._kernels import intersections_pairs

    frac = Fraction(threshold)
    p, q = frac.numerator, frac.denominator
    ranked = _frequency_ranks(dataset)
    sizes = np.asarray(dataset.sizes, dtype=np.int64)
    flat_ranks = np.concatenate(ranked)
    rank_starts = np.zeros(n, dtype=np.int64)
    np.cumsum(sizes[:-1], out=rank_starts[1:])

    def prefix_len(size: int) -> int:
        return size - _ceil_div(p * size, q) + 1  # |x| - ceil(threshold*|x|) + 1

    # bounds of the length filter: threshold*|x| <= |y| <= |x|/threshold
    min_size = np.array([_ceil_div(p * int(s), q) for s in sizes], dtype=np.int64)
    max_size = np.array([(q * int(s)) // p for s in sizes], dtype=np.int64)
    max_total = 2 * int(sizes.max())
    needed_by_total = np.array(
        [required_overlap(0, s, threshold) for s in range(max_total + 1)], dtype=np.int64
    )

    index: dict[int, list[int]] = {}
    raw: list[np.ndarray] = []
    for x in range(n):
        rx = ranked[x]
        plen = prefix_len(rx.size)
        prefix = rx[:plen].tolist()
        gathered = [g for g in (index.get(tok) for tok in prefix) if g]
        if gathered:
            cand = np.concatenate([np.asarray(g, dtype=np.int64) for g in gathered])
            metrics.pre_candidates += cand.size
            cand = np.unique(cand)
            cand = cand[(sizes[cand] >= min_size[x]) & (sizes[cand] <= max_size[x])]
            metrics.candidates += cand.size
            if cand.size:
                inter = np.empty(cand.size, dtype=np.int64)
                intersections_pairs(
                    flat_ranks,
                    rank_starts,
                    sizes,
                    cand,
                    np.full(cand.size, x, dtype=np.int64),
                    inter,
                )
                hits = cand[inter >= needed_by_total[sizes[cand] + sizes[x]]]
                if hits.size:
                    raw.append(pack_pairs(hits, np.full(hits.size, x, dtype=np.int64)))
        for tok in prefix:
            index.setdefault(tok, []).append(x)

    packed = np.unique(np.concatenate(raw)) if raw else np.empty(0, dtype=np.uint64)
    metrics.results = packed.size
    pairs = unpack_pairs(packed)
    metrics.wall_time = time.perf_counter() - start
    return JoinOutcome(pairs=pairs, metrics=metrics)


def naive_join(dataset: Dataset, threshold: float) -> JoinOutcome:
    """Quadratic oracle: every pair checked with plain Python set arithmetic."""
    check_threshold(threshold)
    start = time.perf_counter()
    metrics = Metrics()
    frac = Fraction(threshold)
    p, q = frac.numerator, frac.denominator
    sets = [set(rec.tolist()) for rec in dataset.records]
    pairs: list[tuple[int, int]] = []
    n = len(sets)
    for i in range(n):
        for j in range(i + 1, n):
            inter = len(sets[i] & sets[j])
            union = len(sets[i]) + len(sets[j]) - inter
            if inter * q >= p * union:
                pairs.append((i, j))
    metrics.pre_candidates = n * (n - 1) // 2
    metrics.candidates = metrics.pre_candidates
    metrics.results = len(pairs)
    metrics.wall_time = time.perf_counter() - start
    return JoinOutcome(pairs=pairs, metrics=metrics)
