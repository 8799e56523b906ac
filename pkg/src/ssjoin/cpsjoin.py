"""Recursive randomized set similarity join with an adaptive brute-force rule.

One call is one independent run: it reports a subset of the true join with
perfect precision, and each true pair is found with some fixed probability,
so repeating runs with fresh seeds drives recall toward one.

The algorithm recursively splits the record set into buckets keyed by
embedded MinHash values.  Before splitting a node, records whose average
similarity to the node is close to the join threshold are compared against
the whole node directly and removed; small nodes are finished by exhaustive
pairwise comparison.  Candidate pairs pass through an optional 1-bit
minwise sketch filter before exact verification on the original records.

Two execution modes are provided.  The default heuristic mode samples
splitting positions and estimates node similarity through an aggregate
sketch.  The reference mode evaluates the literal per-element splitting
hash and exact element-count rule; it is slower but directly testable
against hand-computed traces.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bitops import mix64_array, pack_bits, pack_pairs, popcount, unpack_pairs
from .dataset import Dataset, check_threshold, required_overlap
from .hashing import RandomSource
from .sketching import PassThreshold, pass_threshold

_EMPTY_IDS = np.empty(0, dtype=np.int64)


@dataclass
class JoinParams:
    """Tunables for one join run.

    ``use_heuristics=False`` selects the literal reference algorithm
    (per-element splitting hash, exact count-map brute-force rule) instead
    of the sampling heuristics.
    """

    threshold: float
    epsilon: float = 0.1
    limit: int = 250
    use_sketch_filter: bool = True
    use_heuristics: bool = True
    delta: float = 0.05
    seed: int = 1

    def __post_init__(self):
        check_threshold(self.threshold)
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.limit < 1:
            raise ValueError("limit must be at least 1")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")


@dataclass
class Metrics:
    """Work counters for one run.

    ``pre_candidates`` counts every generated pair, ``candidates`` the pairs
    surviving the sketch filter (each exactly verified), ``results`` the
    distinct reported pairs; results <= candidates <= pre_candidates.
    """

    pre_candidates: int = 0
    candidates: int = 0
    results: int = 0
    max_depth: int = 0
    wall_time: float = 0.0


@dataclass
class JoinOutcome:
    """Canonical verified pair list plus run metrics."""

    pairs: list[tuple[int, int]]
    metrics: Metrics


def dedupe_results(pairs) -> list[tuple[int, int]]:
    """Sort canonical (a, b) pairs and drop adjacent duplicates."""
    seq = list(pairs)
    if not seq:
        return []
    arr = np.array(seq, dtype=np.uint32)
    packed = np.unique(pack_pairs(arr[:, 0], arr[:, 1]))
    return unpack_pairs(packed)


class PairPipeline:
    """Candidate counting, optional sketch pre-filter, and exact verification.

    Shared by the recursive join and the LSH baseline so both report
    comparable metrics and identical filtering behavior.
    """

    def __init__(
        self,
        dataset: Dataset,
        sketches: np.ndarray | None,
        pass_thr: PassThreshold | None,
        threshold: float,
        metrics: Metrics,
    ):
        self.flat = dataset.flat
        self.starts = np.asarray(dataset.starts, dtype=np.int64)
        self.sizes = np.asarray(dataset.sizes, dtype=np.int64)
        self.sketches = sketches
        self.min_match = pass_thr.min_matching_bits if pass_thr is not None else None
        self.nbits = 64 * sketches.shape[1] if sketches is not None else 0
        self.threshold = threshold
        self.metrics = metrics
        self.raw: list[np.ndarray] = []  # packed verified pairs, deduped at the end
        # required intersection size indexed by |a| + |b|, exact integers
        max_total = 2 * int(self.sizes.max()) if self.sizes.size else 0
        self.needed_by_total = np.array(
            [required_overlap(0, s, threshold) for s in range(max_total + 1)], dtype=np.int64
        )

    def _verify_batch(self, ids_a: np.ndarray, ids_b: np.ndarray) -> None:
        from ._kernels import intersections_pairs

        if ids_a.size == 0:
            return
        inter = np.empty(ids_a.size, dtype=np.int64)
        intersections_pairs(self.flat, self.starts, self.sizes, ids_a, ids_b, inter)
        verified = inter >= self.needed_by_total[self.sizes[ids_a] + self.sizes[ids_b]]
        if verified.any():
            lo = np.minimum(ids_a[verified], ids_b[verified])
            hi = np.maximum(ids_a[verified], ids_b[verified])
            self.raw.append(pack_pairs(lo, hi))

    def all_pairs(self, ids: np.ndarray) -> None:
        """Compare every unordered pair of the node."""
        m = len(ids)
        if m < 2:
            return
        self.metrics.pre_candidates += m * (m - 1) // 2
        if self.min_match is not None:
            sk = self.sketches[ids]
            words = sk.shape[1]
            cols = np.arange(m)
            # row chunks bound the (chunk, m, words) XOR workspace
            chunk = max(1, int(1_000_000 // max(1, m * words)) * 8)
            for r0 in range(0, m, chunk):
                r1 = min(m, r0 + chunk)
                diff = popcount(sk[r0:r1, None, :] ^ sk[None, :, :]).sum(axis=2)
                keep = (cols[None, :] > np.arange(r0, r1)[:, None]) & (
                    self.nbits - diff >= self.min_match
                )
                ri, ci = np.nonzero(keep)
                self.metrics.candidates += ri.size
                self._verify_batch(ids[ri + r0], ids[ci])
        else:
            ai, bi = np.triu_indices(m, 1)
            self.metrics.candidates += ai.size
            self._verify_batch(ids[ai], ids[bi])

    def point_vs_rest(self, x: int, ids: np.ndarray) -> None:
        """Compare record ``x`` against every other member of the node."""
        others = ids[ids != x]
        if others.size == 0:
            return
        self.metrics.pre_candidates += others.size
        if self.min_match is not None:
            diff = popcount(self.sketches[others] ^ self.sketches[x][None, :]).sum(axis=1)
            others = others[self.nbits - diff >= self.min_match]
        self.metrics.candidates += others.size
        self._verify_batch(np.full(others.size, x, dtype=np.int64), others)

    def finish(self) -> list[tuple[int, int]]:
        if not self.raw:
            return []
        packed = np.unique(np.concatenate(self.raw))
        self.metrics.results = packed.size
        return unpack_pairs(packed)


def reference_scores(embedded_node: np.ndarray) -> np.ndarray:
    """Average positional-match fraction of each node member against the rest.

    Computed from an element-count map in O(m*t): entry x equals the mean
    over other members y of the fraction of positions where x and y hold
    the same embedded value.  Drives the reference brute-force rule.
    """
    m, t = embedded_node.shape
    if m < 2:
        return np.zeros(m)
    keys = (np.arange(t, dtype=np.uint64) << np.uint64(32))[None, :] | embedded_node.astype(np.uint64)
    _, inverse, counts = np.unique(keys.ravel(), return_inverse=True, return_counts=True)
    per_element = counts[inverse].reshape(m, t)
    return (per_element - 1).sum(axis=1) / (t * (m - 1))


class _Engine:
    def __init__(
        self,
        dataset: Dataset,
        embedded: np.ndarray,
        sketches: np.ndarray,
        params: JoinParams,
        rng: RandomSource,
    ):
        self.embedded = embedded
        self.sketches = sketches
        self.params = params
        self.rng = rng.gen
        self.t = embedded.shape[1]
        self.nbits = 64 * sketches.shape[1]
        self.metrics = Metrics()
        thr = pass_threshold(params.threshold, params.delta, self.nbits) if params.use_sketch_filter else None
        self.pipeline = PairPipeline(dataset, sketches, thr, params.threshold, self.metrics)
        self.bf_cutoff = (1.0 - params.epsilon) * params.threshold
        # word/bit coordinates of each sketch bit, for the aggregate sketch
        self._bit_word = np.arange(self.nbits) // 64
        self._bit_shift = (np.arange(self.nbits) % 64).astype(np.uint64)

    def run(self) -> JoinOutcome:
        start = time.perf_counter()
        n = self.embedded.shape[0]
        if n:
            stack: list[tuple[np.ndarray, int]] = [(np.arange(n, dtype=np.int64), 0)]
            while stack:
                ids, depth = stack.pop()
                if depth > self.metrics.max_depth:
                    self.metrics.max_depth = depth
                survivors = self._brute_force(ids)
                if survivors.size >= 2:
                    for bucket in self._split(survivors):
                        stack.append((bucket, depth + 1))
        pairs = self.pipeline.finish()
        self.metrics.wall_time = time.perf_counter() - start
        return JoinOutcome(pairs=pairs, metrics=self.metrics)

    # ------------------------------------------------------------------
    # brute-force step

    def _brute_force(self, ids: np.ndarray) -> np.ndarray:
        if self.params.use_heuristics:
            return self._brute_force_heuristic(ids)
        return self._brute_force_reference(ids)

    def _aggregate_sketch(self, sample_ids: np.ndarray) -> np.ndarray:
        """Sketch of a node: bit i is bit i of the i-th sampled member."""
        bits = (self.sketches[sample_ids, self._bit_word] >> self._bit_shift) & np.uint64(1)
        return pack_bits(bits)

    def _brute_force_heuristic(self, ids: np.ndarray) -> np.ndarray:
        if ids.size <= self.params.limit:
            self.pipeline.all_pairs(ids)
            return _EMPTY_IDS
        samples = self.rng.integers(0, ids.size, size=self.nbits)
        agg = self._aggregate_sketch(ids[samples])
        diff = popcount(self.sketches[ids] ^ agg[None, :]).sum(axis=1)
        est = 2.0 * ((self.nbits - diff) / self.nbits) - 1.0
        flagged = est > self.bf_cutoff
        if not flagged.any():
            return ids
        for x in ids[flagged].tolist():
            self.pipeline.point_vs_rest(x, ids)
        return ids[~flagged]

    def _brute_force_reference(self, ids: np.ndarray) -> np.ndarray:
        current = ids
        while True:
            if current.size <= self.params.limit:
                self.pipeline.all_pairs(current)
                return _EMPTY_IDS
            scores = reference_scores(self.embedded[current])
            flagged = np.flatnonzero(scores > self.bf_cutoff)
            if flagged.size == 0:
                return current
            first = int(flagged[0])
            self.pipeline.point_vs_rest(int(current[first]), current)
            current = np.delete(current, first)

    # ------------------------------------------------------------------
    # splitting step

    def _split(self, ids: np.ndarray) -> list[np.ndarray]:
        if self.params.use_heuristics:
            return self._split_heuristic(ids)
        return self._split_reference(ids)

    def _split_heuristic(self, ids: np.ndarray) -> list[np.ndarray]:
        """Partition by the embedded value at sampled positions.

        The number of distinct positions is Binomial(t, 1/(threshold*t)),
        matching the per-element splitting probability of the reference
        mode restricted to positions (expected 1/threshold positions).
        """
        p = min(1.0, 1.0 / (self.params.threshold * self.t))
        count = int(self.rng.binomial(self.t, p))
        if count == 0:
            return []
        chosen = np.sort(self.rng.choice(self.t, size=count, replace=False))
        buckets: list[np.ndarray] = []
        for pos in chosen.tolist():
            values = self.embedded[ids, pos]
            order = np.argsort(values, kind="stable")
            sv = values[order]
            cuts = np.flatnonzero(sv[1:] != sv[:-1]) + 1
            bounds = np.concatenate(([0], cuts, [sv.size]))
            for a, b in zip(bounds[:-1].tolist(), bounds[1:].tolist()):
                if b - a >= 2:
                    buckets.append(ids[order[a:b]])
        return buckets

    def _split_reference(self, ids: np.ndarray) -> list[np.ndarray]:
        """Literal splitting: a fresh hash over embedded elements.

        Every record joins the bucket of each of its elements (position,
        value) whose hash falls below 1/(threshold*t); the probability is
        clamped to 1 when threshold*t <= 1.
        """
        lam_t = self.params.threshold * self.t
        salt = np.uint64(self.rng.integers(0, 1 << 64, dtype=np.uint64))
        keys = (np.arange(self.t, dtype=np.uint64) << np.uint64(32))[None, :] | self.embedded[
            ids
        ].astype(np.uint64)
        if lam_t <= 1.0:
            rows, cols = np.nonzero(np.ones(keys.shape, dtype=bool))
        else:
            hv = mix64_array(keys ^ salt)
            rows, cols = np.nonzero(hv < np.uint64(int(2**64 / lam_t)))
        if rows.size == 0:
            return []
        chosen_keys = keys[rows, cols]
        order = np.argsort(chosen_keys, kind="stable")
        sk = chosen_keys[order]
        cuts = np.flatnonzero(sk[1:] != sk[:-1]) + 1
        bounds = np.concatenate(([0], cuts, [sk.size]))
        buckets: list[np.ndarray] = []
        for a, b in zip(bounds[:-1].tolist(), bounds[1:].tolist()):
            if b - a >= 2:
                buckets.append(ids[rows[order[a:b]]])
        return buckets


def cpsjoin(
    dataset: Dataset,
    embedded: np.ndarray,
    sketches: np.ndarray,
    params: JoinParams,
    rng: RandomSource | None = None,
) -> JoinOutcome:
    """One independent run of the recursive similarity self-join.

    ``embedded`` (n, t) and ``sketches`` (n, ell) must be aligned index-wise
    with ``dataset.records`` and built under one scheme pair.  Every
    reported pair is verified on the original records, so precision is
    always 1; recall per run is a fixed probability boosted by repetition.
    """
    n = len(dataset)
    if embedded.shape[0] != n or sketches.shape[0] != n:
        raise ValueError("embedded records and sketches must align with the dataset")
    if rng is None:
        rng = RandomSource(params.seed)
    return _Engine(dataset, embedded, sketches, params, rng).run()
