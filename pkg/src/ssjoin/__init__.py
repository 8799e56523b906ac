"""Set similarity joins under a Jaccard threshold.

Exact joins via prefix filtering, a randomized recursive join with
probabilistic recall, a MinHash LSH baseline, and a seeded benchmark
harness that repeats randomized runs until a recall target is met.
"""

from .baselines import LshParams, derive_L, exact_join, minhash_lsh_join, naive_join, tune_k
from .cpsjoin import JoinOutcome, JoinParams, Metrics, cpsjoin, dedupe_results
from .dataset import (
    Dataset,
    DatasetParseError,
    jaccard,
    make_record,
    parse_dataset,
    serialize_dataset,
    verify_pair,
)
from .embedding import EmbeddingScheme, bb_similarity, embed, embed_all
from .harness import (
    Algorithm,
    GroundTruth,
    GroundTruthError,
    Prepared,
    RunReport,
    build_algorithm,
    compute_ground_truth,
    load_ground_truth,
    prepare,
    rs_join,
    run_repetitions,
    run_until_recall,
    save_ground_truth,
    write_report,
)
from .hashing import BitHashFn, MinHashFn, RandomSource, TabulationHash, bit_hash, minhash, tab_hash
from .sketching import (
    PassThreshold,
    SketchScheme,
    build_all_sketches,
    build_sketch,
    estimate_similarity,
    matching_bits,
    pass_threshold,
    sketch_filter,
)

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "BitHashFn",
    "Dataset",
    "DatasetParseError",
    "EmbeddingScheme",
    "GroundTruth",
    "GroundTruthError",
    "JoinOutcome",
    "JoinParams",
    "LshParams",
    "Metrics",
    "MinHashFn",
    "PassThreshold",
    "Prepared",
    "RandomSource",
    "RunReport",
    "SketchScheme",
    "TabulationHash",
    "bb_similarity",
    "bit_hash",
    "build_algorithm",
    "build_all_sketches",
    "build_sketch",
    "compute_ground_truth",
    "cpsjoin",
    "dedupe_results",
    "derive_L",
    "embed",
    "embed_all",
    "estimate_similarity",
    "exact_join",
    "jaccard",
    "load_ground_truth",
    "make_record",
    "matching_bits",
    "minhash",
    "minhash_lsh_join",
    "naive_join",
    "parse_dataset",
    "pass_threshold",
    "prepare",
    "rs_join",
    "run_repetitions",
    "run_until_recall",
    "save_ground_truth",
    "serialize_dataset",
    "sketch_filter",
    "tab_hash",
    "tune_k",
    "verify_pair",
    "write_report",
]
