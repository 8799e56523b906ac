"""Token-set collections: parsing, preprocessing, and exact Jaccard similarity.

A record is a sorted, duplicate-free numpy array of 32-bit token ids.  A
dataset is an ordered collection of such records with per-token frequency
counts, preprocessed so that singleton records and duplicate records (equal
as sets) are removed.  All threshold decisions against a similarity cutoff
are made in exact integer arithmetic, never by comparing floats.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator

import numpy as np

Record = np.ndarray  # sorted unique uint32 tokens, length >= 2 after preprocessing

_MAX_TOKEN = 1 << 32


class DatasetParseError(ValueError):
    """Malformed input line; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


def make_record(tokens: Iterable[int]) -> Record:
    """Validate and canonicalize a token set into a sorted unique array."""
    arr = np.unique(np.asarray(list(tokens), dtype=np.int64))
    if arr.size and (arr[0] < 0 or arr[-1] >= _MAX_TOKEN):
        raise ValueError("token ids must lie in [0, 2^32)")
    return arr.astype(np.uint32)


@dataclass
class Dataset:
    """Preprocessed record collection with token statistics.

    Immutable after construction; safe to share across threads.  ``records``
    keep their input order (first occurrence wins for duplicates), and
    ``line_numbers`` maps each kept record back to its 1-based source line
    so results can be reported against the original file.
    """

    records: list[Record]
    line_numbers: list[int]
    duplicate_lines: dict[int, int]  # dropped source line -> index of the kept record
    token_frequency: dict[int, int]
    universe_size: int
    flat: np.ndarray = field(repr=False)
    starts: np.ndarray = field(repr=False)
    sizes: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.records)

    @classmethod
    def from_records(cls, token_sets: Iterable[Iterable[int]], line_numbers: list[int] | None = None) -> "Dataset":
        """Build a dataset applying the full preprocessing pipeline.

        Per record: tokens deduplicated and sorted; records with fewer than
        two distinct tokens dropped; records equal as sets dropped keeping
        the first occurrence.
        """
        records: list[Record] = []
        kept_lines: list[int] = []
        duplicates: dict[int, int] = {}
        seen: dict[bytes, int] = {}
        for i, tokens in enumerate(token_sets):
            line_no = line_numbers[i] if line_numbers is not None else i + 1
            rec = make_record(tokens)
            if rec.size < 2:
                continue
            key = rec.tobytes()
            if key in seen:
                duplicates[line_no] = seen[key]
                continue
            seen[key] = len(records)
            records.append(rec)
            kept_lines.append(line_no)

        sizes = np.array([r.size for r in records], dtype=np.int64)
        flat = np.concatenate(records) if records else np.empty(0, dtype=np.uint32)
        starts = np.zeros(len(records), dtype=np.intp)
        if len(records):
            np.cumsum(sizes[:-1], out=starts[1:])
        if flat.size:
            uniq, counts = np.unique(flat, return_counts=True)
            frequency = dict(zip(uniq.tolist(), counts.tolist()))
            universe = int(uniq[-1]) + 1
        else:
            frequency = {}
            universe = 0
        return cls(
            records=records,
            line_numbers=kept_lines,
            duplicate_lines=duplicates,
            token_frequency=frequency,
            universe_size=universe,
            flat=flat,
            starts=starts,
            sizes=sizes,
        )

    def fingerprint(self) -> bytes:
        """SHA-256 of the canonical record layout; binds files to datasets."""
        h = hashlib.sha256(b"ssjoin-dataset-v1")
        h.update(np.int64(len(self.records)).tobytes())
        h.update(self.sizes.astype("<i8").tobytes())
        h.update(self.flat.astype("<u4").tobytes())
        return h.digest()


def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, str):
        yield from io.StringIO(source)
    elif isinstance(source, bytes):
        yield from io.StringIO(source.decode("utf-8"))
    else:
        yield from source


def parse_dataset(source, tokenize: bool = False) -> Dataset:
    """Parse whitespace-separated token lines into a preprocessed Dataset.

    ``source`` may be a string, bytes, or an iterable of lines.  Each
    non-blank line is one record of base-10 unsigned 32-bit token ids
    separated by spaces or tabs.  With ``tokenize=True``, fields may be
    arbitrary whitespace-free strings and are mapped to fresh integer ids in
    order of first appearance.

    Raises :class:`DatasetParseError` (with the offending line number) on a
    non-integer or out-of-range token.  Empty input yields an empty Dataset.
    """
    token_ids: dict[str, int] = {}
    rows: list[list[int]] = []
    line_numbers: list[int] = []
    for line_no, line in enumerate(_iter_lines(source), start=1):
        fields = line.split()
        if not fields:
            continue
        if tokenize:
            row = [token_ids.setdefault(f, len(token_ids)) for f in fields]
        else:
            row = []
            for f in fields:
                try:
                    value = int(f, 10)
                except ValueError:
                    raise DatasetParseError(line_no, f"invalid token {f!r}") from None
                if not 0 <= value < _MAX_TOKEN:
                    raise DatasetParseError(line_no, f"token {value} outside [0, 2^32)")
                row.append(value)
        rows.append(row)
        line_numbers.append(line_no)
    return Dataset.from_records(rows, line_numbers)


def serialize_dataset(dataset: Dataset) -> str:
    """One record per line, tokens space-separated; parse/serialize idempotent."""
    return "".join(" ".join(map(str, rec.tolist())) + "\n" for rec in dataset.records)


def intersection_size(a: Record, b: Record) -> int:
    """|a ∩ b| by a linear merge of the two sorted unique arrays."""
    from ._kernels import intersect_sorted

    return int(intersect_sorted(a, b))


def jaccard(a: Record, b: Record) -> float:
    """|a ∩ b| / |a ∪ b| computed from exact integer counts."""
    inter = intersection_size(a, b)
    union = a.size + b.size - inter
    if union == 0:
        return 1.0
    return inter / union


def check_threshold(threshold: float) -> float:
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"similarity threshold must lie in (0, 1), got {threshold}")
    return float(threshold)


def required_overlap(size_a: int, size_b: int, threshold: float) -> int:
    """Smallest intersection size certifying Jaccard >= threshold.

    Equals ceil(threshold * (|a|+|b|) / (1+threshold)), evaluated with the
    exact rational value of the IEEE threshold so the decision is bit-exact.
    """
    frac = Fraction(threshold)
    num = frac.numerator * (size_a + size_b)
    den = frac.numerator + frac.denominator
    return -(-num // den)


def verify_pair(a: Record, b: Record, threshold: float) -> bool:
    """True iff jaccard(a, b) >= threshold, decided in integer arithmetic.

    Exits before the merge when the smaller record alone cannot reach the
    required overlap.
    """
    needed = required_overlap(a.size, b.size, threshold)
    if min(a.size, b.size) < needed:
        return False
    return intersection_size(a, b) >= needed
