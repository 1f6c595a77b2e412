"""Load the labeled proof corpus, collapse grades, and split it deterministically.

The corpus lives in a single UTF-8 JSON-lines file, one proof per line, with
normative field names ``proof_id``, ``problem_id``, ``author_ref`` (optional),
``body_markdown``, and ``raw_labels`` (exactly 7 integers in {0, 1, 2}).
A companion problems file describes each problem and its seven rubric points.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

from . import NUM_RUBRICS
from . import rng


class CorpusError(ValueError):
    """Raised when a corpus or problems file violates the schema."""


@dataclass(frozen=True)
class ProofRecord:
    proof_id: str
    problem_id: str
    author_ref: str
    body_markdown: str
    raw_labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.raw_labels) != NUM_RUBRICS:
            raise CorpusError(
                f"proof {self.proof_id!r}: raw_labels must have {NUM_RUBRICS} "
                f"entries, got {len(self.raw_labels)}"
            )
        for i, v in enumerate(self.raw_labels):
            if v not in (0, 1, 2):
                raise CorpusError(
                    f"proof {self.proof_id!r}: raw_labels[{i}] = {v!r} is outside {{0, 1, 2}}"
                )


@dataclass(frozen=True)
class RubricVector:
    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) != NUM_RUBRICS:
            raise ValueError(f"rubric vector must have {NUM_RUBRICS} bits, got {len(self.bits)}")
        for i, b in enumerate(self.bits):
            if b not in (0, 1):
                raise ValueError(f"bits[{i}] = {b!r} is not binary")

    def __iter__(self):
        return iter(self.bits)

    @property
    def num_correct(self) -> int:
        return sum(self.bits)


@dataclass(frozen=True)
class Problem:
    problem_id: str
    statement_markdown: str
    rubrics: tuple[str, ...]

    def __post_init__(self):
        if len(self.rubrics) != NUM_RUBRICS:
            raise CorpusError(
                f"problem {self.problem_id!r}: expected {NUM_RUBRICS} rubric "
                f"descriptions, got {len(self.rubrics)}"
            )


@dataclass(frozen=True)
class DatasetSplit:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    validation_ids: tuple[str, ...]
    seed: int
    fractions: tuple[float, float, float] = field(default=(0.70, 0.15, 0.15))


def _require_str(obj: dict, key: str, lineno: int, *, optional: bool = False) -> str:
    if key not in obj:
        if optional:
            return ""
        raise CorpusError(f"line {lineno}: missing field {key!r}")
    v = obj[key]
    if not isinstance(v, str):
        raise CorpusError(f"line {lineno}: field {key!r} must be a string, got {type(v).__name__}")
    return v


def load_corpus(path: str | os.PathLike) -> list[ProofRecord]:
    """Read every proof record from a JSON-lines corpus file, in file order.

    Blank lines are skipped. Malformed lines raise CorpusError naming the
    line number and, where possible, the offending field. No deduplication.
    """
    records: list[ProofRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"line {lineno}: record must be an object")
            proof_id = _require_str(obj, "proof_id", lineno)
            problem_id = _require_str(obj, "problem_id", lineno)
            author_ref = _require_str(obj, "author_ref", lineno, optional=True)
            body = _require_str(obj, "body_markdown", lineno)
            labels = obj.get("raw_labels")
            if not isinstance(labels, list):
                raise CorpusError(f"line {lineno}: field 'raw_labels' must be an array")
            if len(labels) != NUM_RUBRICS:
                raise CorpusError(
                    f"line {lineno}: field 'raw_labels' must have {NUM_RUBRICS} "
                    f"entries, got {len(labels)}"
                )
            for i, v in enumerate(labels):
                if not isinstance(v, int) or isinstance(v, bool) or v not in (0, 1, 2):
                    raise CorpusError(
                        f"line {lineno}: field 'raw_labels[{i}]' = {v!r} is outside {{0, 1, 2}}"
                    )
            records.append(
                ProofRecord(
                    proof_id=proof_id,
                    problem_id=problem_id,
                    author_ref=author_ref,
                    body_markdown=body,
                    raw_labels=tuple(labels),
                )
            )
    return records


def load_problems(path: str | os.PathLike) -> dict[str, Problem]:
    """Read the companion problems file (JSON lines) keyed by problem_id."""
    problems: dict[str, Problem] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"line {lineno}: record must be an object")
            problem_id = _require_str(obj, "problem_id", lineno)
            statement = _require_str(obj, "statement_markdown", lineno)
            rubrics = obj.get("rubrics")
            if not isinstance(rubrics, list) or not all(isinstance(r, str) for r in rubrics):
                raise CorpusError(f"line {lineno}: field 'rubrics' must be an array of strings")
            if problem_id in problems:
                raise CorpusError(f"line {lineno}: duplicate problem_id {problem_id!r}")
            problems[problem_id] = Problem(
                problem_id=problem_id,
                statement_markdown=statement,
                rubrics=tuple(rubrics),
            )
    return problems


def filter_nonempty(records: list[ProofRecord]) -> list[ProofRecord]:
    """Drop records whose body is empty or whitespace-only, keeping order."""
    return [r for r in records if r.body_markdown.strip()]


def collapse_labels(raw) -> RubricVector:
    """Collapse three-way grades to binary: 0 and 1 become 0, 2 becomes 1."""
    bits = []
    for i, v in enumerate(raw):
        if v not in (0, 1, 2):
            raise ValueError(f"raw label at index {i} = {v!r} is outside {{0, 1, 2}}")
        bits.append(1 if v == 2 else 0)
    if len(bits) != NUM_RUBRICS:
        raise ValueError(f"expected {NUM_RUBRICS} raw labels, got {len(bits)}")
    return RubricVector(bits=tuple(bits))


def write_corpus_jsonl(records: list[ProofRecord], path) -> int:
    """Write records as one JSON object per line, the format load_corpus reads."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {
                        "proof_id": r.proof_id,
                        "problem_id": r.problem_id,
                        "author_ref": r.author_ref,
                        "body_markdown": r.body_markdown,
                        "raw_labels": list(r.raw_labels),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return len(records)


def select_records(
    records: list[ProofRecord], ids, problem_id: str | None = None
) -> list[ProofRecord]:
    """Pick records by proof id, in id order, optionally filtered to one problem."""
    by_id = {r.proof_id: r for r in records}
    out = []
    for proof_id in ids:
        rec = by_id.get(proof_id)
        if rec is not None and (problem_id is None or rec.problem_id == problem_id):
            out.append(rec)
    return out


def split_dataset(
    records: list[ProofRecord],
    seed: int,
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15),
) -> DatasetSplit:
    """Shuffle proof ids with the portable generator and cut contiguous blocks.

    Block sizes are floor(n * fraction) for test and validation; the train
    block absorbs the rounding remainder. Identical seeds give identical
    splits on every platform.
    """
    if not records:
        raise ValueError("cannot split an empty record list")
    if any(f < 0 for f in fractions):
        raise ValueError(f"fractions must be nonnegative, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")

    ids = [r.proof_id for r in records]
    n = len(ids)
    order = rng.permutation(seed, n)
    shuffled = [ids[int(i)] for i in order]

    n_test = math.floor(n * fractions[1])
    n_val = math.floor(n * fractions[2])
    n_train = n - n_test - n_val

    return DatasetSplit(
        train_ids=tuple(shuffled[:n_train]),
        test_ids=tuple(shuffled[n_train : n_train + n_test]),
        validation_ids=tuple(shuffled[n_train + n_test :]),
        seed=seed,
        fractions=fractions,
    )
