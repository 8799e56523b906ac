"""Command-line front end: dataset stats, ground truth generation, and joins.

Data goes to stdout (or ``--output``); diagnostics go to stderr.  Exit
codes: 0 success, 2 bad configuration or usage, 3 recall target not reached
within the repetition budget (a partial report is still written), 4 input
parse or I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .dataset import Dataset, DatasetParseError, parse_dataset
from .harness import (
    GroundTruth,
    GroundTruthError,
    build_algorithm,
    compute_ground_truth,
    load_ground_truth,
    run_repetitions,
    save_ground_truth,
    write_report,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RECALL_NOT_REACHED = 3
EXIT_PARSE = 4

SEED_ENV_VAR = "SSJOIN_SEED"

# documented defaults, asserted by the configuration self-test
DEFAULTS = {
    "t": 128,
    "ell": 8,
    "delta": 0.05,
    "epsilon": 0.1,
    "limit": 250,
    "k": 0,  # auto-tune over 2..10
    "phi": 0.9,
    "max_reps": 32,
    "seed": 1,
    "threads": 1,
    "format": "csv",
}

ALGORITHMS = ("cpsjoin", "minhash", "allpairs", "naive")


def _default_seed() -> int:
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            print(f"warning: ignoring non-integer {SEED_ENV_VAR}={env!r}", file=sys.stderr)
    return DEFAULTS["seed"]


def _load_dataset(path: str, tokenize: bool) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_dataset(fh, tokenize=tokenize)


def _add_dataset_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("input", help="dataset file: one record per line, integer tokens")
    parser.add_argument(
        "--tokenize",
        action="store_true",
        help="map arbitrary whitespace-separated strings to fresh integer ids",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssjoin",
        description="Set similarity joins under a Jaccard threshold, exact and randomized.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_stats = sub.add_parser("stats", help="print dataset summary statistics")
    _add_dataset_args(p_stats)

    p_gt = sub.add_parser("groundtruth", help="compute and store the exact join result")
    _add_dataset_args(p_gt)
    p_gt.add_argument("--lambda", dest="threshold", type=float, required=True, help="similarity threshold in (0,1)")
    p_gt.add_argument("--output", required=True, help="ground-truth file to write")

    p_join = sub.add_parser("join", help="run a similarity self-join and report metrics")
    _add_dataset_args(p_join)
    p_join.add_argument("--lambda", dest="threshold", type=float, required=True, help="similarity threshold in (0,1)")
    p_join.add_argument("--alg", choices=ALGORITHMS, default="cpsjoin")
    p_join.add_argument("--t", type=int, default=DEFAULTS["t"], help="embedding size")
    p_join.add_argument("--ell", type=int, default=DEFAULTS["ell"], help="sketch length in 64-bit words")
    p_join.add_argument("--delta", type=float, default=DEFAULTS["delta"], help="sketch false-negative budget")
    p_join.add_argument("--epsilon", type=float, default=DEFAULTS["epsilon"], help="brute-force rule sensitivity")
    p_join.add_argument("--limit", type=int, default=DEFAULTS["limit"], help="brute-force size cutoff")
    p_join.add_argument("--k", type=int, default=DEFAULTS["k"], help="LSH band length; 0 tunes over 2..10")
    p_join.add_argument("--phi", type=float, default=DEFAULTS["phi"], help="recall target")
    p_join.add_argument("--max-reps", type=int, default=DEFAULTS["max_reps"], help="repetition budget")
    p_join.add_argument("--seed", type=int, default=None, help=f"master seed (default {SEED_ENV_VAR} or 1)")
    p_join.add_argument("--no-sketch-filter", action="store_true", help="disable the sketch pre-filter")
    p_join.add_argument(
        "--reference-mode",
        action="store_true",
        help="run the literal reference algorithm instead of the sampling heuristics",
    )
    p_join.add_argument(
        "--fixed-L",
        dest="fixed_L",
        action="store_true",
        help="minhash only: run the derived worst-case repetition count instead of stopping at the recall target",
    )
    p_join.add_argument("--ground-truth", dest="ground_truth", help="ground-truth file for recall tracking")
    p_join.add_argument("--output", help="report file (default: stdout)")
    p_join.add_argument("--format", choices=("csv", "json"), default=DEFAULTS["format"])
    p_join.add_argument("--threads", type=int, default=DEFAULTS["threads"], help="concurrent repetitions")
    return parser


def cmd_stats(args) -> int:
    dataset = _load_dataset(args.input, args.tokenize)
    n = len(dataset)
    avg = dataset.sizes.mean() if n else 0.0
    max_freq = max(dataset.token_frequency.values(), default=0)
    print(f"records: {n}")
    print(f"avg_record_size: {float(avg):.6g}")
    print(f"distinct_tokens: {len(dataset.token_frequency)}")
    print(f"max_token_frequency: {max_freq}")
    return EXIT_OK


def cmd_groundtruth(args) -> int:
    dataset = _load_dataset(args.input, args.tokenize)
    truth = compute_ground_truth(dataset, args.threshold)
    save_ground_truth(args.output, truth)
    print(f"pairs: {len(truth.pairs)}")
    return EXIT_OK


def _emit_report(report, args) -> None:
    payload = write_report(report, args.format)
    if args.output:
        Path(args.output).write_bytes(payload)
    else:
        sys.stdout.write(payload.decode("utf-8"))


def cmd_join(args) -> int:
    dataset = _load_dataset(args.input, args.tokenize)
    seed = args.seed if args.seed is not None else _default_seed()
    algorithm = build_algorithm(
        args.alg,
        args.threshold,
        epsilon=args.epsilon,
        limit=args.limit,
        use_sketch_filter=not args.no_sketch_filter,
        reference_mode=args.reference_mode,
        delta=args.delta,
        t=args.t,
        ell=args.ell,
        k=args.k,
        phi_target=args.phi,
    )

    truth: GroundTruth | None = None
    if args.ground_truth:
        truth = load_ground_truth(args.ground_truth)
        truth.ensure_matches(dataset, args.threshold)

    if not algorithm.randomized:
        # exact algorithms need a single pass; their recall is 1 by definition
        if truth is None:
            truth = compute_ground_truth(dataset, args.threshold)
        report = run_repetitions(algorithm, dataset, 1, seed, ground_truth=truth)
        _emit_report(report, args)
        return EXIT_OK

    if args.fixed_L:
        if args.alg != "minhash":
            print("--fixed-L applies to the minhash algorithm only", file=sys.stderr)
            return EXIT_CONFIG
        algorithm.setup(dataset, seed)
        rounds = algorithm.derived_L()
        report = run_repetitions(
            algorithm, dataset, rounds, seed, ground_truth=truth, threads=args.threads
        )
        _emit_report(report, args)
        return EXIT_OK

    if truth is None:
        print(
            "error: recall-driven runs need a ground truth; generate one with "
            f"'ssjoin groundtruth {args.input} --lambda {args.threshold} --output <file>'",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    report = run_repetitions(
        algorithm,
        dataset,
        repetitions=args.max_reps,
        seed=seed,
        ground_truth=truth,
        phi_target=args.phi,
        threads=args.threads,
    )
    _emit_report(report, args)
    if not report.reached(args.phi):
        print(
            f"recall {report.final_recall():.4f} below target {args.phi} after "
            f"{report.repetitions_used} repetitions",
            file=sys.stderr,
        )
        return EXIT_RECALL_NOT_REACHED
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "stats":
            return cmd_stats(args)
        if args.command == "groundtruth":
            return cmd_groundtruth(args)
        return cmd_join(args)
    except DatasetParseError as exc:
        print(f"error: {args.input}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except GroundTruthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
