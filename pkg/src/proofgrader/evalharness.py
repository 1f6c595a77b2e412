"""Evaluation of trained graders: per-rubric confusion metrics, score-level
agreement (RMSE and Pearson's r over 0-100 totals), and the training-size
sweep with a fixed held-out test set.

CSV column orders are normative: metrics files carry (problem, rubric,
accuracy, f1, tp, fp, tn, fn), sweep files carry (problem, provider,
train_size, mean_accuracy).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from . import NUM_RUBRICS, RUBRIC_IDS
from . import rng
from .corpus import DatasetSplit, ProofRecord, RubricVector, collapse_labels, filter_nonempty
from .embeddings import Embedder
from .grader import ProblemGrader, TrainConfig, _predict_many, train_problem_grader


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class RubricMetrics:
    rubric_id: str
    accuracy: float
    f1: float
    confusion: ConfusionMatrix


@dataclass(frozen=True)
class MetricsReport:
    per_rubric: tuple[RubricMetrics, ...]
    mean_accuracy: float
    rmse_totals: float
    pearson_totals: float
    n_test: int


@dataclass(frozen=True)
class SweepPoint:
    train_size: int
    mean_accuracy: float
    per_rubric_accuracy: tuple[float, ...]


def confusion(predictions, truth) -> ConfusionMatrix:
    """Standard 2x2 counts with label 1 ("correct") as the positive class."""
    preds = list(predictions)
    gold = list(truth)
    if len(preds) != len(gold):
        raise ValueError(f"{len(preds)} predictions vs {len(gold)} truth labels")
    if not preds:
        raise ValueError("cannot build a confusion matrix from zero examples")
    tp = fp = tn = fn = 0
    for p, t in zip(preds, gold):
        if p not in (0, 1) or t not in (0, 1):
            raise ValueError(f"labels must be binary, got prediction {p!r} vs truth {t!r}")
        if p == 1 and t == 1:
            tp += 1
        elif p == 1 and t == 0:
            fp += 1
        elif p == 0 and t == 0:
            tn += 1
        else:
            fn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.n == 0:
        raise ValueError("empty confusion matrix")
    return (cm.tp + cm.tn) / cm.n


def f1(cm: ConfusionMatrix) -> float:
    """2tp / (2tp + fp + fn); defined as 1 when no positives exist anywhere,
    since predictions and truth agree vacuously."""
    if cm.n == 0:
        raise ValueError("empty confusion matrix")
    denom = 2 * cm.tp + cm.fp + cm.fn
    if denom == 0:
        return 1.0
    return 2 * cm.tp / denom


def total_scores(rubric_vectors) -> list[float]:
    return [100.0 * sum(v.bits) / NUM_RUBRICS for v in rubric_vectors]


def rmse(x, y) -> float:
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size < 1:
        raise ValueError("rmse needs at least one pair")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def pearson(x, y) -> float:
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise ValueError("pearson needs at least two pairs")
    da = a - a.mean()
    db = b - b.mean()
    var_a = float(da @ da)
    var_b = float(db @ db)
    if var_a == 0.0 or var_b == 0.0:
        raise ValueError("pearson is undefined for a zero-variance input")
    return float((da @ db) / math.sqrt(var_a * var_b))


def evaluate_problem(
    grader: ProblemGrader, embedder: Embedder, test_records: list[ProofRecord]
) -> MetricsReport:
    """Score a grader on held-out records.

    Per-rubric accuracy and F1 come from the confusion matrices; RMSE and
    Pearson's r compare predicted and true 0-100 totals per proof.
    mean_accuracy is the exact arithmetic mean of the seven accuracies.
    """
    if not test_records:
        raise ValueError("test split is empty")
    vectors = embedder.embed_batch([r.body_markdown for r in test_records])
    X = np.stack([v.values.astype(np.float64) for v in vectors])
    truth = np.array([collapse_labels(r.raw_labels).bits for r in test_records], dtype=np.int64)

    per_rubric = []
    pred_cols = []
    for k, rubric_id in enumerate(RUBRIC_IDS):
        preds = _predict_many(grader.models[k], X)
        pred_cols.append(preds)
        cm = confusion(preds.tolist(), truth[:, k].tolist())
        per_rubric.append(
            RubricMetrics(rubric_id=rubric_id, accuracy=accuracy(cm), f1=f1(cm), confusion=cm)
        )
    pred_matrix = np.stack(pred_cols, axis=1)

    pred_vectors = [RubricVector(bits=tuple(int(b) for b in row)) for row in pred_matrix]
    true_vectors = [RubricVector(bits=tuple(int(b) for b in row)) for row in truth]
    pred_totals = total_scores(pred_vectors)
    true_totals = total_scores(true_vectors)

    return MetricsReport(
        per_rubric=tuple(per_rubric),
        mean_accuracy=sum(m.accuracy for m in per_rubric) / NUM_RUBRICS,
        rmse_totals=rmse(pred_totals, true_totals),
        pearson_totals=pearson(pred_totals, true_totals),
        n_test=len(test_records),
    )


def sweep_grid(pool_size: int) -> list[int]:
    """Training sizes 50, 100, 150, 200, then hundreds, capped by the pool."""
    sizes = [50, 100, 150, 200] + list(range(300, pool_size + 1, 100))
    return [s for s in sizes if s <= pool_size]


def sweep_partition(
    records: list[ProofRecord], problem_id: str, seed: int, test_frac: float = 0.30
) -> tuple[list[ProofRecord], list[ProofRecord]]:
    """Cut one problem's usable records into (fixed test set, training pool).

    The shuffle uses the portable generator, so the same seed always yields
    the same partition. The test set holds floor(n * test_frac) records.
    """
    usable = filter_nonempty([r for r in records if r.problem_id == problem_id])
    n = len(usable)
    if n < 2:
        raise ValueError(f"not enough records for problem {problem_id!r} to sweep")
    order = rng.permutation(seed, n)
    shuffled = [usable[int(i)] for i in order]
    n_test = math.floor(n * test_frac)
    if n_test < 1:
        raise ValueError("test fraction leaves no test records")
    return shuffled[:n_test], shuffled[n_test:]


def size_sweep(
    records: list[ProofRecord],
    problem_id: str,
    embedder: Embedder,
    cfg: TrainConfig,
    test_frac: float = 0.30,
) -> list[SweepPoint]:
    """Accuracy as a function of training-set size.

    Every sweep point trains on a nested prefix of the shuffled pool and is
    evaluated on the same fixed test set. Epoch selection inside each point
    also uses the fixed test set, matching the protocol the curve reproduces.
    """
    test_records, pool = sweep_partition(records, problem_id, cfg.seed, test_frac)
    n = len(test_records) + len(pool)
    n_test = len(test_records)

    grid = sweep_grid(len(pool))
    if not grid:
        raise ValueError(
            f"training pool of {len(pool)} records is smaller than the smallest grid size"
        )

    test_ids = tuple(r.proof_id for r in test_records)
    sweep_cfg = replace(cfg, selection_split="test")
    points = []
    for size in grid:
        prefix = pool[:size]
        split = DatasetSplit(
            train_ids=tuple(r.proof_id for r in prefix),
            test_ids=test_ids,
            validation_ids=(),
            seed=cfg.seed,
            fractions=(len(prefix) / n, n_test / n, 0.0),
        )
        grader, _ = train_problem_grader(records, split, problem_id, embedder, sweep_cfg)
        report = evaluate_problem(grader, embedder, test_records)
        points.append(
            SweepPoint(
                train_size=size,
                mean_accuracy=report.mean_accuracy,
                per_rubric_accuracy=tuple(m.accuracy for m in report.per_rubric),
            )
        )
    return points


def write_metrics_csv(path, problem_id: str, report: MetricsReport) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["problem", "rubric", "accuracy", "f1", "tp", "fp", "tn", "fn"])
        for m in report.per_rubric:
            cm = m.confusion
            writer.writerow(
                [problem_id, m.rubric_id, repr(m.accuracy), repr(m.f1), cm.tp, cm.fp, cm.tn, cm.fn]
            )


def write_sweep_csv(path, problem_id: str, provider_id: str, points: list[SweepPoint]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["problem", "provider", "train_size", "mean_accuracy"])
        for p in points:
            writer.writerow([problem_id, provider_id, p.train_size, repr(p.mean_accuracy)])


def format_metrics_table(problem_id: str, report: MetricsReport) -> str:
    """Human-readable summary table for terminal output."""
    lines = [
        f"problem {problem_id}  (n_test={report.n_test})",
        f"{'rubric':<8}{'accuracy':>10}{'f1':>10}{'tp':>6}{'fp':>6}{'tn':>6}{'fn':>6}",
    ]
    for m in report.per_rubric:
        cm = m.confusion
        lines.append(
            f"{m.rubric_id:<8}{m.accuracy:>10.4f}{m.f1:>10.4f}"
            f"{cm.tp:>6}{cm.fp:>6}{cm.tn:>6}{cm.fn:>6}"
        )
    lines.append(
        f"mean accuracy {report.mean_accuracy:.4f}   rmse {report.rmse_totals:.2f}   "
        f"pearson r {report.pearson_totals:.4f}"
    )
    return "\n".join(lines)
