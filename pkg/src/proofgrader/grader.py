"""Per-rubric linear softmax graders: training, selection, persistence, scoring.

Each (problem, rubric) pair gets its own 2-class linear head over embeddings,
trained with mini-batch gradient descent under a warmup-then-decay learning
rate schedule. The epoch budget is chosen per rubric by trying every value on
a grid and keeping the one with the best selection-split accuracy.

Model file layout (all integers little-endian): magic ``PGMD``, version u16,
problem id and provider id as u16 length plus UTF-8 bytes, dim u32, base seed
i64, seven u32 epoch counts, then seven parameter blocks of float64 values
(2*dim weights row-major followed by 2 bias entries).
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from . import NUM_RUBRICS, RUBRIC_IDS, rng
from .corpus import (
    DatasetSplit,
    ProofRecord,
    RubricVector,
    collapse_labels,
    select_records,
)
from .embeddings import Embedder

MODEL_MAGIC = b"PGMD"
MODEL_VERSION = 1

DEFAULT_EPOCHS_GRID = tuple(range(100, 1001, 100))


class ModelFormatError(ValueError):
    """Model file is corrupt, truncated, or from an unsupported version."""


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; the learning rate or feature scale is off."""


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    epochs_grid: tuple[int, ...] = DEFAULT_EPOCHS_GRID
    peak_lr: float = 0.001
    warmup_frac: float = 0.6
    decay_floor_frac: float = 0.1
    seed: int = 0
    selection_split: str = "validation"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if not (0.0 < self.warmup_frac < 1.0):
            raise ValueError(f"warmup_frac must lie in (0, 1), got {self.warmup_frac}")
        if not (0.0 < self.decay_floor_frac <= 1.0):
            raise ValueError(
                f"decay_floor_frac must lie in (0, 1], got {self.decay_floor_frac}"
            )
        if not self.epochs_grid:
            raise ValueError("epochs_grid must be nonempty")
        if any(e <= 0 for e in self.epochs_grid):
            raise ValueError(f"epochs_grid entries must be positive, got {self.epochs_grid}")
        if list(self.epochs_grid) != sorted(self.epochs_grid):
            raise ValueError(f"epochs_grid must be sorted ascending, got {self.epochs_grid}")
        if self.selection_split not in ("test", "validation"):
            raise ValueError(
                f"selection_split must be 'test' or 'validation', got {self.selection_split!r}"
            )


@dataclass(frozen=True, eq=False)
class LinearRubricModel:
    weights: np.ndarray
    bias: np.ndarray
    rubric_id: str
    problem_id: str
    provider_id: str
    dim: int
    trained_epochs: int
    seed: int
    train_loss_final: float

    def __post_init__(self):
        if self.weights.shape != (2, self.dim) or self.bias.shape != (2,):
            raise ValueError(
                f"parameter shapes {self.weights.shape}/{self.bias.shape} "
                f"do not match dim {self.dim}"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("model parameters must be finite")


@dataclass(frozen=True, eq=False)
class ProblemGrader:
    problem_id: str
    provider_id: str
    seed: int
    models: tuple[LinearRubricModel, ...]

    def __post_init__(self):
        if len(self.models) != NUM_RUBRICS:
            raise ValueError(f"expected {NUM_RUBRICS} rubric models, got {len(self.models)}")
        for k, m in enumerate(self.models):
            if m.rubric_id != RUBRIC_IDS[k]:
                raise ValueError(f"model {k} has rubric_id {m.rubric_id!r}, want {RUBRIC_IDS[k]}")
            if m.provider_id != self.provider_id or m.dim != self.models[0].dim:
                raise ValueError("all rubric models must share provider_id and dim")

    @property
    def dim(self) -> int:
        return self.models[0].dim


@dataclass(frozen=True)
class RubricSelection:
    rubric_id: str
    chosen_epochs: int
    chosen_accuracy: float
    grid_accuracies: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class SelectionReport:
    problem_id: str
    provider_id: str
    selection_split: str
    rubrics: tuple[RubricSelection, ...]


@dataclass(frozen=True)
class GradeResult:
    rubric: RubricVector
    empty_body: bool


def lr_at(epoch: int, total_epochs: int, cfg: TrainConfig) -> float:
    """Learning rate for one epoch: linear warmup to the peak, then
    exponential decay hitting peak * decay_floor_frac at the final epoch."""
    if total_epochs < 2:
        raise ValueError(f"total_epochs must be at least 2, got {total_epochs}")
    if not (0 <= epoch < total_epochs):
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs})")
    warmup = math.floor(cfg.warmup_frac * total_epochs)
    if epoch < warmup:
        return cfg.peak_lr * (epoch + 1) / warmup
    return cfg.peak_lr * cfg.decay_floor_frac ** ((epoch - warmup + 1) / (total_epochs - warmup))


def softmax_xent_loss_grad(weights, bias, X, y):
    """Mean softmax cross-entropy over a batch with analytic gradients.

    Returns (loss, grad_weights, grad_bias). Log-sum-exp is stabilized by
    subtracting the row max before exponentiating.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    logits = X @ weights.T + bias
    m = logits.max(axis=1, keepdims=True)
    shifted = logits - m
    logsumexp = np.log(np.exp(shifted).sum(axis=1, keepdims=True)) + m
    logp = logits - logsumexp
    loss = float(-logp[np.arange(n), y].mean())
    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    return loss, delta.T @ X, delta.sum(axis=0)


def _validate_training_inputs(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValueError(f"X must be a 2-d array, got shape {X.shape}")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} embeddings but {y.shape[0]} labels")
    if X.shape[0] < 1:
        raise ValueError("need at least one training example")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be binary (0 or 1)")
    return X, y.astype(np.int64)


def run_training_loop(X, y, cfg: TrainConfig, total_epochs: int, seed: int, loss_history=None):
    """Mini-batch gradient descent from zero-initialized parameters.

    The example order is reshuffled every epoch with an independent substream
    of the portable generator, so runs are bit-reproducible for a fixed seed.
    Returns (weights, bias, final_epoch_mean_loss).
    """
    X, y = _validate_training_inputs(X, y)
    n, d = X.shape
    weights = np.zeros((2, d), dtype=np.float64)
    bias = np.zeros(2, dtype=np.float64)
    epoch_loss = math.nan
    for epoch in range(total_epochs):
        lr = lr_at(epoch, total_epochs, cfg)
        order = rng.permutation(rng.value(seed, epoch), n)
        Xs, ys = X[order], y[order]
        loss_sum = 0.0
        for lo in range(0, n, cfg.batch_size):
            xb, yb = Xs[lo : lo + cfg.batch_size], ys[lo : lo + cfg.batch_size]
            loss, gw, gb = softmax_xent_loss_grad(weights, bias, xb, yb)
            loss_sum += loss * xb.shape[0]
            weights -= lr * gw
            bias -= lr * gb
        epoch_loss = loss_sum / n
        if not math.isfinite(epoch_loss):
            raise TrainingDivergedError(
                f"epoch {epoch} mean loss is {epoch_loss}; lower peak_lr or rescale features"
            )
        if loss_history is not None:
            loss_history.append(epoch_loss)
    return weights, bias, epoch_loss


def train_rubric_model(
    X,
    y,
    cfg: TrainConfig,
    total_epochs: int,
    *,
    rubric_id: str,
    problem_id: str,
    provider_id: str,
    seed: int | None = None,
) -> LinearRubricModel:
    if seed is None:
        seed = cfg.seed
    weights, bias, final_loss = run_training_loop(X, y, cfg, total_epochs, seed)
    weights.flags.writeable = False
    bias.flags.writeable = False
    return LinearRubricModel(
        weights=weights,
        bias=bias,
        rubric_id=rubric_id,
        problem_id=problem_id,
        provider_id=provider_id,
        dim=X.shape[1] if hasattr(X, "shape") else len(X[0]),
        trained_epochs=total_epochs,
        seed=seed,
        train_loss_final=final_loss,
    )


def predict_proba(model: LinearRubricModel, embedding) -> tuple[float, float]:
    """Softmax class probabilities (p_incorrect, p_correct) for one embedding."""
    x = np.asarray(embedding, dtype=np.float64)
    if x.shape != (model.dim,):
        raise ValueError(f"embedding shape {x.shape} does not match model dim {model.dim}")
    logits = model.weights @ x + model.bias
    shifted = logits - logits.max()
    expd = np.exp(shifted)
    p = expd / expd.sum()
    return float(p[0]), float(p[1])


def predict(model: LinearRubricModel, embedding) -> int:
    """1 iff p_correct strictly exceeds 0.5; an exact tie predicts 0."""
    return 1 if predict_proba(model, embedding)[1] > 0.5 else 0


def _predict_many(model: LinearRubricModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    logits = X @ model.weights.T + model.bias
    return (logits[:, 1] > logits[:, 0]).astype(np.int64)


def _embed_matrix(embedder: Embedder, records) -> np.ndarray:
    vectors = embedder.embed_batch([r.body_markdown for r in records])
    return np.stack([v.values.astype(np.float64) for v in vectors])


def _label_matrix(records) -> np.ndarray:
    return np.array([collapse_labels(r.raw_labels).bits for r in records], dtype=np.int64)


def train_problem_grader(
    records: list[ProofRecord],
    split: DatasetSplit,
    problem_id: str,
    embedder: Embedder,
    cfg: TrainConfig,
) -> tuple[ProblemGrader, SelectionReport]:
    """Train all seven rubric heads for one problem with epoch-grid selection.

    For every rubric, one model is trained per grid value (rubric k uses seed
    cfg.seed + k) and the one with the highest selection-split accuracy wins;
    ties go to the fewest epochs.
    """
    train_records = select_records(records, split.train_ids, problem_id)
    sel_ids = split.validation_ids if cfg.selection_split == "validation" else split.test_ids
    sel_records = select_records(records, sel_ids, problem_id)
    if not train_records:
        raise ValueError(f"no training records for problem {problem_id!r}")
    if not sel_records:
        raise ValueError(
            f"no {cfg.selection_split} records for problem {problem_id!r} to select epochs on"
        )

    X_train = _embed_matrix(embedder, train_records)
    X_sel = _embed_matrix(embedder, sel_records)
    y_train = _label_matrix(train_records)
    y_sel = _label_matrix(sel_records)

    models = []
    selections = []
    for k, rubric_id in enumerate(RUBRIC_IDS):
        rubric_seed = cfg.seed + k
        best = None
        grid_accs = []
        for total_epochs in cfg.epochs_grid:
            model = train_rubric_model(
                X_train,
                y_train[:, k],
                cfg,
                total_epochs,
                rubric_id=rubric_id,
                problem_id=problem_id,
                provider_id=embedder.cfg.provider_id,
                seed=rubric_seed,
            )
            acc = float(np.mean(_predict_many(model, X_sel) == y_sel[:, k]))
            grid_accs.append((total_epochs, acc))
            if best is None or acc > best[0]:
                best = (acc, model)
        models.append(best[1])
        selections.append(
            RubricSelection(
                rubric_id=rubric_id,
                chosen_epochs=best[1].trained_epochs,
                chosen_accuracy=best[0],
                grid_accuracies=tuple(grid_accs),
            )
        )

    grader = ProblemGrader(
        problem_id=problem_id,
        provider_id=embedder.cfg.provider_id,
        seed=cfg.seed,
        models=tuple(models),
    )
    report = SelectionReport(
        problem_id=problem_id,
        provider_id=embedder.cfg.provider_id,
        selection_split=cfg.selection_split,
        rubrics=tuple(selections),
    )
    return grader, report


def grade_proof(grader: ProblemGrader, body_markdown: str, embedder: Embedder) -> GradeResult:
    """Score one proof body on all seven rubrics.

    Empty and whitespace-only bodies are graded all-incorrect and flagged
    instead of raising, since students do submit blanks.
    """
    if grader.provider_id != embedder.cfg.provider_id:
        raise ValueError(
            f"grader expects provider {grader.provider_id!r}, "
            f"embedder is {embedder.cfg.provider_id!r}"
        )
    if not body_markdown.strip():
        return GradeResult(rubric=RubricVector(bits=(0,) * NUM_RUBRICS), empty_body=True)
    vector = embedder.embed(body_markdown)
    x = vector.values.astype(np.float64)
    bits = tuple(predict(m, x) for m in grader.models)
    return GradeResult(rubric=RubricVector(bits=bits), empty_body=False)


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def save_model(path, grader: ProblemGrader) -> None:
    d = grader.dim
    buf = bytearray()
    buf += MODEL_MAGIC
    buf += struct.pack("<H", MODEL_VERSION)
    buf += _pack_str(grader.problem_id)
    buf += _pack_str(grader.provider_id)
    buf += struct.pack("<I", d)
    buf += struct.pack("<q", grader.seed)
    for m in grader.models:
        buf += struct.pack("<I", m.trained_epochs)
    for m in grader.models:
        buf += m.weights.astype("<f8").tobytes(order="C")
        buf += m.bias.astype("<f8").tobytes()
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(buf)
    os.replace(tmp, path)


def load_model(path) -> ProblemGrader:
    """Read a PGMD model file back into a ProblemGrader.

    The format does not carry training losses, so train_loss_final is NaN on
    loaded models. Per-rubric seeds are reconstructed as base seed + index.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    offset = 0

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(data):
            raise ModelFormatError(f"truncated {what} at offset {offset}")
        chunk = data[offset : offset + n]
        offset += n
        return chunk

    if take(4, "magic") != MODEL_MAGIC:
        raise ModelFormatError("bad magic bytes at offset 0")
    (version,) = struct.unpack("<H", take(2, "version"))
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    (pid_len,) = struct.unpack("<H", take(2, "problem id length"))
    problem_id = take(pid_len, "problem id").decode("utf-8")
    (prov_len,) = struct.unpack("<H", take(2, "provider id length"))
    provider_id = take(prov_len, "provider id").decode("utf-8")
    (dim,) = struct.unpack("<I", take(4, "dim"))
    if dim <= 0:
        raise ModelFormatError(f"non-positive dim {dim}")
    (seed,) = struct.unpack("<q", take(8, "seed"))
    epochs = struct.unpack(f"<{NUM_RUBRICS}I", take(4 * NUM_RUBRICS, "epoch counts"))
    models = []
    for k, rubric_id in enumerate(RUBRIC_IDS):
        raw_w = take(16 * dim, f"{rubric_id} weights")
        raw_b = take(16, f"{rubric_id} bias")
        weights = np.frombuffer(raw_w, dtype="<f8").reshape(2, dim).copy()
        bias = np.frombuffer(raw_b, dtype="<f8").copy()
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise ModelFormatError(f"non-finite parameters in {rubric_id} block")
        weights.flags.writeable = False
        bias.flags.writeable = False
        models.append(
            LinearRubricModel(
                weights=weights,
                bias=bias,
                rubric_id=rubric_id,
                problem_id=problem_id,
                provider_id=provider_id,
                dim=dim,
                trained_epochs=int(epochs[k]),
                seed=seed + k,
                train_loss_final=math.nan,
            )
        )
    if offset != len(data):
        raise ModelFormatError(f"trailing garbage at offset {offset}")
    return ProblemGrader(
        problem_id=problem_id, provider_id=provider_id, seed=seed, models=tuple(models)
    )
