"""Synthetic proof corpus with planted, perfectly separable rubric structure.

Each rubric point gets a dedicated signal token whose feature-hash bucket
(under the deterministic provider's seed) is distinct from every other
signal's, and the filler vocabulary is filtered so no filler ever lands in a
signal bucket. A record's raw label for rubric k is 2 exactly when signal
token k appears in its body, so under the deterministic provider the
collapsed label is a linear function of the embedding with a wide margin:
the signal bucket holds +-1/norm when the token is present and exactly 0
when absent. Any linear trainer worth its salt should reach ~100% accuracy.
"""

from __future__ import annotations

import struct

from . import NUM_RUBRICS
from .corpus import ProofRecord, write_corpus_jsonl
from .rng import PortableRng, fnv1a64

FILLER_VOCAB_SIZE = 60
MIN_FILLERS = 5
MAX_FILLERS = 15


def _token_bucket_sign(token: str, dim: int, provider_seed: int) -> tuple[int, float]:
    seed_bytes = struct.pack("<Q", provider_seed & 0xFFFFFFFFFFFFFFFF)
    h = fnv1a64(seed_bytes + token.encode("utf-8"))
    return h % dim, 1.0 if (h >> 63) == 0 else -1.0


def pick_signal_tokens(dim: int, provider_seed: int) -> list[tuple[str, int, float]]:
    """Choose 7 signal tokens hashing to pairwise distinct buckets."""
    if dim < NUM_RUBRICS:
        raise ValueError(f"dim must be at least {NUM_RUBRICS}, got {dim}")
    chosen: list[tuple[str, int, float]] = []
    used: set[int] = set()
    i = 0
    while len(chosen) < NUM_RUBRICS:
        token = f"signal{i}"
        bucket, sign = _token_bucket_sign(token, dim, provider_seed)
        if bucket not in used:
            used.add(bucket)
            chosen.append((token, bucket, sign))
        i += 1
        if i > 10000:
            raise RuntimeError("could not find distinct signal buckets")
    return chosen


def build_filler_vocab(
    dim: int, provider_seed: int, signal_buckets: set[int], size: int = FILLER_VOCAB_SIZE
) -> list[str]:
    """Filler words guaranteed to hash outside every signal bucket."""
    vocab: list[str] = []
    i = 0
    while len(vocab) < size:
        word = f"word{i}"
        bucket, _ = _token_bucket_sign(word, dim, provider_seed)
        if bucket not in signal_buckets:
            vocab.append(word)
        i += 1
        if i > 100000:
            raise RuntimeError("could not build filler vocabulary")
    return vocab


def build_synthetic_corpus(
    n: int,
    problem_id: str = "P1",
    dim: int = 32,
    provider_seed: int = 7,
    corpus_seed: int = 123,
) -> list[ProofRecord]:
    """Generate n records whose labels follow the planted linear rule.

    Raw label for rubric k is 2 when signal token k is present (probability
    one half), otherwise 0 or 1 uniformly; collapsing yields the planted
    binary labels. Same seeds give byte-identical corpora on every platform.
    """
    signals = pick_signal_tokens(dim, provider_seed)
    vocab = build_filler_vocab(dim, provider_seed, {b for _, b, _ in signals})
    gen = PortableRng(corpus_seed)
    records = []
    for i in range(n):
        n_fillers = MIN_FILLERS + gen.below(MAX_FILLERS - MIN_FILLERS + 1)
        tokens = [vocab[gen.below(len(vocab))] for _ in range(n_fillers)]
        raw = []
        for token, _, _ in signals:
            if gen.below(2) == 1:
                tokens.append(token)
                raw.append(2)
            else:
                raw.append(gen.below(2))
        records.append(
            ProofRecord(
                proof_id=f"synth-{problem_id}-{i:05d}",
                problem_id=problem_id,
                author_ref=f"student-{i:05d}",
                body_markdown=" ".join(tokens),
                raw_labels=tuple(raw),
            )
        )
    return records
