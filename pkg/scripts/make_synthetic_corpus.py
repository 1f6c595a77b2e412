#!/usr/bin/env python3
"""Generate a synthetic labeled corpus with planted rubric structure.

The labels follow a linear rule in the deterministic provider's feature
space, so a linear grader trained on this corpus should reach ~100% test
accuracy. Useful for exercising the full pipeline without any dataset or
remote provider. The provider seed given here must match the [providers.*]
seed used for embedding, or the planted structure is lost.
"""

import argparse

from proofgrader.corpus import write_corpus_jsonl
from proofgrader.synthcorpus import build_synthetic_corpus


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="corpus JSONL to write")
    parser.add_argument("--n", type=int, default=1000, help="records per problem")
    parser.add_argument(
        "--problems", default="P1", help="comma-separated problem ids (default P1)"
    )
    parser.add_argument("--dim", type=int, default=256, help="embedding dimension")
    parser.add_argument(
        "--provider-seed", type=int, default=7, help="deterministic provider seed"
    )
    parser.add_argument("--corpus-seed", type=int, default=123, help="sampling seed")
    args = parser.parse_args()

    records = []
    for i, pid in enumerate(args.problems.split(",")):
        records.extend(
            build_synthetic_corpus(
                args.n,
                problem_id=pid.strip(),
                dim=args.dim,
                provider_seed=args.provider_seed,
                corpus_seed=args.corpus_seed + i,
            )
        )
    n = write_corpus_jsonl(records, args.out)
    print(f"wrote {n} records to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
