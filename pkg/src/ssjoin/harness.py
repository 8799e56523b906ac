"""Benchmark harness: ground truth, recall-driven repetition, and reports.

The harness owns everything around a single join run: building the
embedding and sketch preprocessing once per dataset load, deriving
decorrelated per-repetition seeds from one master seed, accumulating the
deduplicated union of results, tracking recall against a stored ground
truth, and serializing machine-readable reports.
"""

from __future__ import annotations

import csv
import io
import json
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import LshParams, derive_L, exact_join, minhash_lsh_join, naive_join, tune_k
from .bitops import derive_seed, pack_pairs
from .cpsjoin import JoinOutcome, JoinParams, Metrics, cpsjoin
from .dataset import Dataset
from .embedding import EmbeddingScheme, embed_all
from .hashing import RandomSource
from .sketching import SketchScheme, build_all_sketches

# seed stream tags; repetition i draws from stream _STREAM_REPS + i
_STREAM_EMBED = 1
_STREAM_SKETCH = 2
_STREAM_TUNE = 3
_STREAM_REPS = 16


class GroundTruthError(ValueError):
    """Corrupted, mismatched, or missing ground-truth data."""


@dataclass(frozen=True)
class GroundTruth:
    """Canonical exact-join pair list bound to its dataset by fingerprint."""

    pairs: list[tuple[int, int]]
    threshold: float
    fingerprint: bytes

    def ensure_matches(self, dataset: Dataset, threshold: float) -> None:
        if self.fingerprint != dataset.fingerprint():
            raise GroundTruthError("ground truth belongs to a different dataset (fingerprint mismatch)")
        if self.threshold != threshold:
            raise GroundTruthError(
                f"ground truth was computed at threshold {self.threshold}, not {threshold}"
            )


def compute_ground_truth(dataset: Dataset, threshold: float) -> GroundTruth:
    outcome = exact_join(dataset, threshold)
    return GroundTruth(pairs=outcome.pairs, threshold=threshold, fingerprint=dataset.fingerprint())


_GT_MAGIC = b"SSJGT\x00\x01\n"
_GT_VERSION = 1


def save_ground_truth(path, truth: GroundTruth) -> None:
    """Binary pair list with header, plus a JSON sidecar for humans."""
    path = Path(path)
    arr = np.array(truth.pairs, dtype="<u4").reshape(-1, 2)
    header = _GT_MAGIC + struct.pack("<Id", _GT_VERSION, truth.threshold)
    header += truth.fingerprint + struct.pack("<Q", arr.shape[0])
    path.write_bytes(header + arr.tobytes())
    sidecar = {
        "format": "ssjoin-ground-truth",
        "version": _GT_VERSION,
        "threshold": truth.threshold,
        "pairs": arr.shape[0],
        "dataset_fingerprint": truth.fingerprint.hex(),
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")


def load_ground_truth(path) -> GroundTruth:
    data = Path(path).read_bytes()
    head_len = len(_GT_MAGIC) + 12 + 32 + 8
    if len(data) < head_len or not data.startswith(_GT_MAGIC):
        raise GroundTruthError(f"{path}: not a ground-truth file")
    version, threshold = struct.unpack_from("<Id", data, len(_GT_MAGIC))
    if version != _GT_VERSION:
        raise GroundTruthError(f"{path}: unsupported version {version}")
    fp_off = len(_GT_MAGIC) + 12
    fingerprint = data[fp_off : fp_off + 32]
    (count,) = struct.unpack_from("<Q", data, fp_off + 32)
    body = data[head_len:]
    if len(body) != count * 8:
        raise GroundTruthError(f"{path}: truncated pair list")
    arr = np.frombuffer(body, dtype="<u4").reshape(-1, 2)
    pairs = [(int(a), int(b)) for a, b in arr]
    return GroundTruth(pairs=pairs, threshold=threshold, fingerprint=fingerprint)


# ----------------------------------------------------------------------
# algorithms


@dataclass
class Prepared:
    """Per-dataset preprocessing shared by every repetition."""

    embedding: EmbeddingScheme
    embedded: np.ndarray
    sketch_scheme: SketchScheme
    sketches: np.ndarray


def prepare(dataset: Dataset, t: int = 128, ell: int = 8, seed: int = 1) -> Prepared:
    """Build the embedding and sketch matrices under seeds derived from one master."""
    scheme = EmbeddingScheme.from_seed(t, derive_seed(seed, _STREAM_EMBED))
    sketch_scheme = SketchScheme.from_seed(ell, derive_seed(seed, _STREAM_SKETCH))
    return Prepared(
        embedding=scheme,
        embedded=embed_all(scheme, dataset),
        sketch_scheme=sketch_scheme,
        sketches=build_all_sketches(sketch_scheme, dataset),
    )


class Algorithm:
    """A named join routine the harness can repeat under derived seeds.

    ``setup`` runs once per (dataset, master seed) and may build shared
    state; ``run_once`` must afterwards be read-only so repetitions can run
    concurrently.
    """

    name: str = "?"
    randomized: bool = True

    def __init__(self, threshold: float):
        self.threshold = threshold

    def setup(self, dataset: Dataset, master_seed: int) -> None:  # pragma: no cover - trivial
        pass

    def run_once(self, dataset: Dataset, seed: int) -> JoinOutcome:
        raise NotImplementedError

    def params_echo(self) -> dict:
        return {"threshold": self.threshold}


class CpsJoinAlgorithm(Algorithm):
    name = "cpsjoin"
    randomized = True

    def __init__(self, params: JoinParams, t: int = 128, ell: int = 8):
        super().__init__(params.threshold)
        self.params = params
        self.t = t
        self.ell = ell
        self.prepared: Prepared | None = None

    def setup(self, dataset: Dataset, master_seed: int) -> None:
        self.prepared = prepare(dataset, self.t, self.ell, master_seed)

    def run_once(self, dataset: Dataset, seed: int) -> JoinOutcome:
        if self.prepared is None:
            raise RuntimeError("setup() must run before run_once()")
        return cpsjoin(
            dataset,
            self.prepared.embedded,
            self.prepared.sketches,
            replace(self.params, seed=seed),
            RandomSource(seed),
        )

    def params_echo(self) -> dict:
        p = self.params
        return {
            "threshold": p.threshold,
            "epsilon": p.epsilon,
            "limit": p.limit,
            "use_sketch_filter": p.use_sketch_filter,
            "use_heuristics": p.use_heuristics,
            "delta": p.delta,
            "t": self.t,
            "ell": self.ell,
        }


class MinHashAlgorithm(Algorithm):
    """One harness repetition is a single LSH round (L = 1)."""

    name = "minhash"
    randomized = True

    def __init__(
        self,
        params: LshParams,
        delta: float = 0.05,
        use_sketch_filter: bool = True,
        ell: int = 8,
    ):
        super().__init__(params.threshold)
        self.params = params
        self.delta = delta
        self.use_sketch_filter = use_sketch_filter
        self.ell = ell
        self.sketches: np.ndarray | None = None
        self.resolved_k: int | None = None

    def setup(self, dataset: Dataset, master_seed: int) -> None:
        if self.use_sketch_filter:
            scheme = SketchScheme.from_seed(self.ell, derive_seed(master_seed, _STREAM_SKETCH))
            self.sketches = build_all_sketches(scheme, dataset)
        if self.params.k == 0:
            self.resolved_k = tune_k(
                dataset, self.params.threshold, RandomSource(derive_seed(master_seed, _STREAM_TUNE))
            )
        else:
            self.resolved_k = self.params.k

    def derived_L(self) -> int:
        if self.resolved_k is None:
            raise RuntimeError("setup() must run before derived_L()")
        return self.params.L or derive_L(self.params.threshold, self.resolved_k, self.params.phi_target)

    def run_once(self, dataset: Dataset, seed: int) -> JoinOutcome:
        if self.resolved_k is None:
            raise RuntimeError("setup() must run before run_once()")
        params = replace(self.params, k=self.resolved_k, L=1, seed=seed)
        return minhash_lsh_join(
            dataset,
            params,
            self.sketches,
            RandomSource(seed),
            use_sketch_filter=self.use_sketch_filter,
            delta=self.delta,
        )

    def params_echo(self) -> dict:
        echo = {
            "threshold": self.params.threshold,
            "k": self.params.k,
            "phi_target": self.params.phi_target,
            "delta": self.delta,
            "use_sketch_filter": self.use_sketch_filter,
            "ell": self.ell,
        }
        if self.resolved_k is not None:
            echo["resolved_k"] = self.resolved_k
            echo["L"] = self.derived_L()
        return echo


class AllPairsAlgorithm(Algorithm):
    name = "allpairs"
    randomized = False

    def run_once(self, dataset: Dataset, seed: int) -> JoinOutcome:
        return exact_join(dataset, self.threshold)


class NaiveAlgorithm(Algorithm):
    name = "naive"
    randomized = False

    def run_once(self, dataset: Dataset, seed: int) -> JoinOutcome:
        return naive_join(dataset, self.threshold)


def build_algorithm(
    name: str,
    threshold: float,
    *,
    epsilon: float = 0.1,
    limit: int = 250,
    use_sketch_filter: bool = True,
    reference_mode: bool = False,
    delta: float = 0.05,
    t: int = 128,
    ell: int = 8,
    k: int = 0,
    phi_target: float = 0.9,
) -> Algorithm:
    if name == "cpsjoin":
        params = JoinParams(
            threshold=threshold,
            epsilon=epsilon,
            limit=limit,
            use_sketch_filter=use_sketch_filter,
            use_heuristics=not reference_mode,
            delta=delta,
        )
        return CpsJoinAlgorithm(params, t=t, ell=ell)
    if name == "minhash":
        params = LshParams(threshold=threshold, k=k, phi_target=phi_target)
        return MinHashAlgorithm(params, delta=delta, use_sketch_filter=use_sketch_filter, ell=ell)
    if name == "allpairs":
        return AllPairsAlgorithm(threshold)
    if name == "naive":
        return NaiveAlgorithm(threshold)
    raise ValueError(f"unknown algorithm {name!r}")


# ----------------------------------------------------------------------
# repetition loop


@dataclass
class RepetitionRow:
    rep: int
    metrics: Metrics
    cum_results: int
    cum_recall: float | None


@dataclass
class RunReport:
    """Per-repetition metrics plus the cumulative recall trajectory."""

    algorithm: str
    params: dict
    rows: list[RepetitionRow] = field(default_factory=list)
    repetitions_used: int = 0
    total_seconds: float = 0.0

    def final_recall(self) -> float | None:
        return self.rows[-1].cum_recall if self.rows else None

    def reached(self, phi_target: float) -> bool:
        recall = self.final_recall()
        return recall is not None and recall >= phi_target


def _pack_pair_list(pairs: list[tuple[int, int]]) -> np.ndarray:
    if not pairs:
        return np.empty(0, dtype=np.uint64)
    arr = np.array(pairs, dtype=np.uint32)
    return pack_pairs(arr[:, 0], arr[:, 1])


def _recall(found: np.ndarray, truth: np.ndarray) -> float:
    """|found ∩ truth| / |truth|; an empty truth counts as fully recalled."""
    if truth.size == 0:
        return 1.0
    return np.intersect1d(found, truth, assume_unique=True).size / truth.size


def run_repetitions(
    algorithm: Algorithm,
    dataset: Dataset,
    repetitions: int,
    seed: int,
    ground_truth: GroundTruth | None = None,
    phi_target: float | None = None,
    threads: int = 1,
) -> RunReport:
    """Accumulate deduplicated results over independent repetitions.

    Repetition i uses seed ``derive_seed(seed, _STREAM_REPS + i)``.  When a
    recall target is given, the loop stops at the first repetition whose
    cumulative recall reaches it.  With ``threads > 1`` repetitions execute
    in waves; outcomes are merged in repetition order, so the report is
    identical to a single-threaded run.
    """
    if repetitions < 1:
        raise ValueError("need at least one repetition")
    if ground_truth is not None:
        ground_truth.ensure_matches(dataset, algorithm.threshold)
    start = time.perf_counter()
    algorithm.setup(dataset, seed)
    truth = _pack_pair_list(ground_truth.pairs) if ground_truth is not None else None
    found = np.empty(0, dtype=np.uint64)
    rows: list[RepetitionRow] = []
    if not algorithm.randomized:
        repetitions = 1

    def seed_of(i: int) -> int:
        return derive_seed(seed, _STREAM_REPS + i)

    def process(i: int, outcome: JoinOutcome) -> bool:
        nonlocal found
        found = np.union1d(found, _pack_pair_list(outcome.pairs))
        recall = _recall(found, truth) if truth is not None else None
        rows.append(
            RepetitionRow(rep=i, metrics=outcome.metrics, cum_results=int(found.size), cum_recall=recall)
        )
        return phi_target is not None and recall is not None and recall >= phi_target

    done = False
    if threads <= 1:
        for i in range(repetitions):
            if process(i, algorithm.run_once(dataset, seed_of(i))):
                done = True
                break
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for wave in range(0, repetitions, threads):
                indices = range(wave, min(repetitions, wave + threads))
                outcomes = list(pool.map(lambda i: algorithm.run_once(dataset, seed_of(i)), indices))
                for i, outcome in zip(indices, outcomes):
                    if process(i, outcome):
                        done = True
                        break
                if done:
                    break

    report = RunReport(
        algorithm=algorithm.name,
        params=algorithm.params_echo(),
        rows=rows,
        repetitions_used=len(rows),
        total_seconds=time.perf_counter() - start,
    )
    return report


def run_until_recall(
    algorithm: Algorithm,
    dataset: Dataset,
    phi_target: float,
    max_reps: int,
    seed: int,
    ground_truth: GroundTruth | None,
    threads: int = 1,
) -> RunReport:
    """Repeat until cumulative recall reaches the target or max_reps is hit.

    Ground truth is mandatory: without it recall cannot be measured.
    """
    if ground_truth is None:
        raise GroundTruthError(
            "no ground truth for this dataset/threshold; generate one first "
            "(CLI: ssjoin groundtruth)"
        )
    return run_repetitions(
        algorithm,
        dataset,
        repetitions=max_reps,
        seed=seed,
        ground_truth=ground_truth,
        phi_target=phi_target,
        threads=threads,
    )


# ----------------------------------------------------------------------
# general R-S joins via the tagged-union reduction


def rs_join(
    r_dataset: Dataset,
    s_dataset: Dataset,
    algorithm: Algorithm,
    seed: int = 1,
) -> JoinOutcome:
    """Join two collections, reporting (r_index, s_index) pairs.

    Runs the self-join machinery once on the deduplicated union of both
    inputs, then expands each result through record provenance and keeps
    only cross-collection pairs.  Records with identical content in both
    inputs pair with themselves (similarity 1).
    """
    provenance: list[list[tuple[int, int]]] = []
    seen: dict[bytes, int] = {}
    union_records = []
    for side, ds in ((0, r_dataset), (1, s_dataset)):
        for idx, rec in enumerate(ds.records):
            key = rec.tobytes()
            if key in seen:
                provenance[seen[key]].append((side, idx))
            else:
                seen[key] = len(union_records)
                union_records.append(rec)
                provenance.append([(side, idx)])
    union = Dataset.from_records(union_records)

    algorithm.setup(union, seed)
    outcome = algorithm.run_once(union, derive_seed(seed, _STREAM_REPS))

    cross: set[tuple[int, int]] = set()
    for a, b in outcome.pairs:
        for side_a, ia in provenance[a]:
            for side_b, ib in provenance[b]:
                if side_a != side_b:
                    cross.add((ia, ib) if side_a == 0 else (ib, ia))
    for entries in provenance:
        r_ids = [i for side, i in entries if side == 0]
        s_ids = [i for side, i in entries if side == 1]
        for ir in r_ids:
            for is_ in s_ids:
                cross.add((ir, is_))

    metrics = replace(outcome.metrics, results=len(cross))
    return JoinOutcome(pairs=sorted(cross), metrics=metrics)


# ----------------------------------------------------------------------
# reports

_CSV_HEADER = ["rep", "pre_candidates", "candidates", "results", "cum_results", "cum_recall", "max_depth", "seconds"]


def write_report(report: RunReport, format: str = "csv") -> bytes:
    """Serialize a report; CSV carries one row per repetition, JSON everything."""
    if format == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(_CSV_HEADER)
        for row in report.rows:
            m = row.metrics
            writer.writerow(
                [
                    row.rep,
                    m.pre_candidates,
                    m.candidates,
                    m.results,
                    row.cum_results,
                    "" if row.cum_recall is None else repr(row.cum_recall),
                    m.max_depth,
                    repr(m.wall_time),
                ]
            )
        return out.getvalue().encode("utf-8")
    if format == "json":
        doc = {
            "algorithm": report.algorithm,
            "params": report.params,
            "repetitions_used": report.repetitions_used,
            "total_seconds": report.total_seconds,
            "repetitions": [
                {
                    "rep": row.rep,
                    "pre_candidates": row.metrics.pre_candidates,
                    "candidates": row.metrics.candidates,
                    "results": row.metrics.results,
                    "cum_results": row.cum_results,
                    "cum_recall": row.cum_recall,
                    "max_depth": row.metrics.max_depth,
                    "seconds": row.metrics.wall_time,
                }
                for row in report.rows
            ],
        }
        return (json.dumps(doc, indent=2) + "\n").encode("utf-8")
    raise ValueError(f"unknown report format {format!r}")


def read_report_json(data) -> RunReport:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    doc = json.loads(data)
    rows = [
        RepetitionRow(
            rep=entry["rep"],
            metrics=Metrics(
                pre_candidates=entry["pre_candidates"],
                candidates=entry["candidates"],
                results=entry["results"],
                max_depth=entry["max_depth"],
                wall_time=entry["seconds"],
            ),
            cum_results=entry["cum_results"],
            cum_recall=entry["cum_recall"],
        )
        for entry in doc["repetitions"]
    ]
    return RunReport(
        algorithm=doc["algorithm"],
        params=doc["params"],
        rows=rows,
        repetitions_used=doc["repetitions_used"],
        total_seconds=doc["total_seconds"],
    )


def read_report_csv(data) -> list[RepetitionRow]:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    reader = csv.reader(io.StringIO(data))
    header = next(reader, None)
    if header != _CSV_HEADER:
        raise ValueError("unrecognized report CSV header")
    rows = []
    for rec in reader:
        rows.append(
            RepetitionRow(
                rep=int(rec[0]),
                metrics=Metrics(
                    pre_candidates=int(rec[1]),
                    candidates=int(rec[2]),
                    results=int(rec[3]),
                    max_depth=int(rec[6]),
                    wall_time=float(rec[7]),
                ),
                cum_results=int(rec[4]),
                cum_recall=None if rec[5] == "" else float(rec[5]),
            )
        )
    return rows
