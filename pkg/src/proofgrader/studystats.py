"""Statistical analysis of attempt logs and survey responses.

Covers the full study pipeline: effort screening, initial/best score
extraction, Kruskal-Wallis tests with Mann-Whitney post-hocs, the
best-on-initial OLS regression, Welch and paired t-tests, one-way ANOVA,
Cronbach's alpha, and Likert coding. P-values come from the special-function
routines in this package, not from an external stats library.

All computations are pure; nothing here mutates shared state.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .corpus import RubricVector
from .special import chi2_sf, f_sf, norm_sf, student_t_sf_two_sided

# Treatment group labels, in the column order used by the result tables.
GROUPS = ("SelfEval", "Random", "First")

# Questions worded negatively on the survey instrument; their values are
# negated by code_likert so that larger always means more favorable.
DEFAULT_NEGATIVE_QUESTIONS = frozenset({"S04"})

# The agree/disagree scale. Disagree is coded -1: the scale is symmetric
# around Neutral = 0 even though one listing of the instrument prints "(1)"
# for Disagree, which we treat as a typo rather than silently absorb.
LIKERT_LABELS = {
    "Strongly disagree": -2,
    "Disagree": -1,
    "Neutral": 0,
    "Agree": 1,
    "Strongly agree": 2,
}

# Question pairs asking the same thing about human graders vs the automatic
# grader (accuracy, helpfulness, satisfaction).
PAIRED_QUESTION_IDS = (("S01", "S08"), ("S02", "S09"), ("S03", "S10"))

_SCORE_TOL = 1e-6


class StatsError(ValueError):
    """Invalid input to a statistical routine."""


class RankDeficiencyError(StatsError):
    """The regression design matrix is rank deficient."""

    def __init__(self, column_name: str, column_index: int):
        self.column_name = column_name
        self.column_index = column_index
        super().__init__(
            f"design matrix is rank deficient at column {column_index}"
            f" ({column_name!r}); it is linearly dependent on earlier columns"
        )


@dataclass(frozen=True)
class Attempt:
    """One graded submission as recorded in the attempt log.

    body_chars counts non-whitespace characters of the submitted body; the
    log keeps it so effort screening can run without retaining proof text.
    """

    student_id: str
    group: str
    problem_id: str
    timestamp: float
    score_percent: float
    rubric: RubricVector
    body_hash: str
    body_chars: int

    def __post_init__(self):
        if self.group not in GROUPS:
            raise StatsError(f"unknown group {self.group!r}; expected one of {GROUPS}")
        if not self.student_id:
            raise StatsError("student_id must be non-empty")
        expected = 100.0 * sum(self.rubric.bits) / len(self.rubric.bits)
        if abs(self.score_percent - expected) > _SCORE_TOL:
            raise StatsError(
                f"score {self.score_percent} inconsistent with rubric "
                f"{self.rubric.bits} (expected {expected})"
            )
        if self.body_chars < 0:
            raise StatsError(f"body_chars must be nonnegative, got {self.body_chars}")


@dataclass(frozen=True)
class LikertResponse:
    """A single survey answer on the -2..2 agree/disagree scale."""

    question_id: str
    value: int
    reverse_coded: bool = False
    student_id: str = ""
    group: str = ""

    def __post_init__(self):
        if self.value not in (-2, -1, 0, 1, 2):
            raise StatsError(f"Likert value must be in -2..2, got {self.value}")
        if not self.question_id:
            raise StatsError("question_id must be non-empty")


@dataclass(frozen=True)
class EffortScreen:
    included: tuple[str, ...]
    excluded: dict[str, str]


@dataclass(frozen=True)
class ScorePair:
    initial: float
    best: float


@dataclass(frozen=True)
class ScoreRow:
    """One regression observation: a (student, problem) initial/best pair."""

    student_id: str
    group: str
    problem_id: str
    initial: float
    best: float


@dataclass(frozen=True)
class KruskalResult:
    h: float
    p: float
    df: int
    all_identical: bool


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p: float


@dataclass(frozen=True)
class PairwiseComparison:
    group_a: str
    group_b: str
    u: float
    p_raw: float
    p_adjusted: float


@dataclass(frozen=True)
class OlsResult:
    column_names: tuple[str, ...]
    coef: tuple[float, ...]
    stderr: tuple[float, ...]
    tvalues: tuple[float, ...]
    pvalues: tuple[float, ...]
    r_squared: float
    n_obs: int
    df_resid: int
    rss: float

    def coefficient(self, name: str) -> float:
        return self.coef[self.column_names.index(name)]


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float
    method: str


@dataclass(frozen=True)
class AnovaResult:
    f: float
    p: float
    df_between: int
    df_within: int


@dataclass(frozen=True)
class BestScoreComparison:
    """Per-problem group comparison of best scores (means, SDs, H, p)."""

    problem_id: str
    group_means: tuple[float, ...]
    group_sds: tuple[float, ...]
    group_sizes: tuple[int, ...]
    h: float
    p: float
    all_identical: bool


@dataclass(frozen=True)
class SurveyPairComparison:
    group: str
    question_a: str
    question_b: str
    mean_a: float
    mean_b: float
    t: float
    df: float
    p: float
    method: str


@dataclass(frozen=True)
class SurveyAnovaRow:
    question_id: str
    group_means: tuple[float, ...]
    f: float
    p: float


def screen_effort(
    attempts: Iterable[Attempt],
    *,
    roster: Optional[Iterable[str]] = None,
    min_chars: int = 20,
) -> EffortScreen:
    """Split students into included and excluded by submission effort.

    A student is excluded iff every submission across all problems has fewer
    than min_chars non-whitespace characters (blank counts as zero). Students
    on the roster with no attempts at all are excluded as blank.
    """
    by_student: dict[str, list[Attempt]] = defaultdict(list)
    for a in attempts:
        by_student[a.student_id].append(a)
    students = set(by_student)
    if roster is not None:
        students |= set(roster)

    included = []
    excluded: dict[str, str] = {}
    for sid in sorted(students):
        recs = by_student.get(sid, [])
        if not recs:
            excluded[sid] = "no attempts submitted"
        elif any(a.body_chars >= min_chars for a in recs):
            included.append(sid)
        else:
            excluded[sid] = (
                f"all {len(recs)} submissions blank or under "
                f"{min_chars} non-whitespace characters"
            )
    return EffortScreen(included=tuple(included), excluded=excluded)


def initial_best(attempts: Iterable[Attempt]) -> dict[tuple[str, str], ScorePair]:
    """Per (student, problem): first-attempt score and best score."""
    streams: dict[tuple[str, str], list[Attempt]] = defaultdict(list)
    for a in attempts:
        streams[(a.student_id, a.problem_id)].append(a)
    out = {}
    for key, recs in streams.items():
        recs.sort(key=lambda a: a.timestamp)
        out[key] = ScorePair(
            initial=recs[0].score_percent,
            best=max(a.score_percent for a in recs),
        )
    return out


def score_rows(attempts: Sequence[Attempt]) -> tuple[ScoreRow, ...]:
    """Regression observations joined with each student's group.

    Raises if a student appears under more than one group.
    """
    group_of: dict[str, str] = {}
    for a in attempts:
        seen = group_of.setdefault(a.student_id, a.group)
        if seen != a.group:
            raise StatsError(
                f"student {a.student_id!r} appears in groups {seen!r} and {a.group!r}"
            )
    pairs = initial_best(attempts)
    rows = [
        ScoreRow(
            student_id=sid,
            group=group_of[sid],
            problem_id=pid,
            initial=pair.initial,
            best=pair.best,
        )
        for (sid, pid), pair in pairs.items()
    ]
    rows.sort(key=lambda r: (r.problem_id, r.student_id))
    return tuple(rows)


def _midranks(values: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Ranks with midpoints for ties, plus the size of each tie run."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    tie_sizes = []
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        tie_sizes.append(j - i + 1)
        i = j + 1
    return ranks, tie_sizes


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> KruskalResult:
    """Kruskal-Wallis H with midrank tie correction; p from chi-square."""
    if len(groups) < 2:
        raise StatsError(f"need at least 2 groups, got {len(groups)}")
    sizes = [len(g) for g in groups]
    if any(s < 1 for s in sizes):
        raise StatsError("every group needs at least one value")
    n = sum(sizes)
    if n < 3:
        raise StatsError(f"need at least 3 values in total, got {n}")
    df = len(groups) - 1

    pooled = np.concatenate([np.asarray(g, dtype=np.float64) for g in groups])
    if np.all(pooled == pooled[0]):
        return KruskalResult(h=0.0, p=1.0, df=df, all_identical=True)

    ranks, tie_sizes = _midranks(pooled)
    h = 0.0
    start = 0
    for size in sizes:
        rank_sum = float(ranks[start : start + size].sum())
        h += rank_sum * rank_sum / size
        start += size
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    correction = 1.0 - sum(t**3 - t for t in tie_sizes) / (n**3 - n)
    h /= correction
    return KruskalResult(h=h, p=chi2_sf(max(h, 0.0), df), df=df, all_identical=False)


def mannwhitney_u(a: Sequence[float], b: Sequence[float]) -> MannWhitneyResult:
    """Two-sided Mann-Whitney U via the tie-corrected normal approximation.

    U is the smaller of the two one-sided statistics; the z-score uses a
    0.5 continuity correction.
    """
    if len(a) < 1 or len(b) < 1:
        raise StatsError("both samples must be non-empty")
    n1, n2 = len(a), len(b)
    pooled = np.concatenate(
        [np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)]
    )
    ranks, tie_sizes = _midranks(pooled)
    r1 = float(ranks[:n1].sum())
    u1 = r1 - n1 * (n1 + 1) / 2.0
    u2 = n1 * n2 - u1
    u = min(u1, u2)

    n = n1 + n2
    tie_term = sum(t**3 - t for t in tie_sizes) / (n * (n - 1))
    sigma_sq = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if sigma_sq <= 0.0:
        return MannWhitneyResult(u=u, p=1.0)
    z = max(abs(u - n1 * n2 / 2.0) - 0.5, 0.0) / math.sqrt(sigma_sq)
    return MannWhitneyResult(u=u, p=min(1.0, 2.0 * norm_sf(z)))


def posthoc_pairwise(
    groups: Mapping[str, Sequence[float]],
) -> tuple[PairwiseComparison, ...]:
    """Pairwise Mann-Whitney U tests with Bonferroni adjustment."""
    names = list(groups)
    if len(names) < 2:
        raise StatsError("need at least 2 groups for pairwise comparisons")
    pairs = list(itertools.combinations(names, 2))
    out = []
    for ga, gb in pairs:
        res = mannwhitney_u(groups[ga], groups[gb])
        out.append(
            PairwiseComparison(
                group_a=ga,
                group_b=gb,
                u=res.u,
                p_raw=res.p,
                p_adjusted=min(1.0, res.p * len(pairs)),
            )
        )
    return tuple(out)


def _gauss_solve(
    a: np.ndarray, b: np.ndarray, column_names: Sequence[str]
) -> np.ndarray:
    """Solve a @ x = b by Gaussian elimination with partial pivoting.

    A pivot within rounding noise of zero means the column being eliminated
    is linearly dependent on its predecessors, which is reported by name.
    """
    a = a.astype(np.float64, copy=True)
    b = b.astype(np.float64, copy=True)
    p = a.shape[0]
    scale = float(np.abs(a).max())
    if scale == 0.0:
        raise RankDeficiencyError(column_names[0], 0)
    tol = scale * p * 1e-12
    for col in range(p):
        pivot_row = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[pivot_row, col]) <= tol:
            raise RankDeficiencyError(column_names[col], col)
        if pivot_row != col:
            a[[col, pivot_row]] = a[[pivot_row, col]]
            b[[col, pivot_row]] = b[[pivot_row, col]]
        for row in range(col + 1, p):
            factor = a[row, col] / a[col, col]
            if factor != 0.0:
                a[row, col:] -= factor * a[col, col:]
                b[row] -= factor * b[col]
    x = np.zeros_like(b)
    for col in range(p - 1, -1, -1):
        x[col] = (b[col] - a[col, col + 1 :] @ x[col + 1 :]) / a[col, col]
    return x


def ols_fit(
    x: np.ndarray, y: np.ndarray, column_names: Sequence[str]
) -> OlsResult:
    """Ordinary least squares via the normal equations.

    Classical homoskedastic standard errors; two-sided p-values from the
    Student t survival function with n - p degrees of freedom; centered R².
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2:
        raise StatsError(f"design matrix must be 2-d, got shape {x.shape}")
    n, p = x.shape
    if len(column_names) != p:
        raise StatsError(f"{p} columns but {len(column_names)} names")
    if y.shape != (n,):
        raise StatsError(f"response shape {y.shape} does not match {n} rows")
    if n <= p:
        raise StatsError(f"need more observations ({n}) than parameters ({p})")

    xtx = x.T @ x
    xty = x.T @ y
    beta = _gauss_solve(xtx, xty.reshape(p, 1), column_names)[:, 0]
    xtx_inv = _gauss_solve(xtx, np.eye(p), column_names)

    residuals = y - x @ beta
    rss = float(residuals @ residuals)
    df_resid = n - p
    sigma_sq = rss / df_resid
    se = np.sqrt(np.maximum(sigma_sq * np.diag(xtx_inv), 0.0))

    tvals = []
    pvals = []
    for bi, si in zip(beta, se):
        if si == 0.0:
            t = 0.0 if bi == 0.0 else math.copysign(math.inf, bi)
            pv = 1.0 if bi == 0.0 else 0.0
        else:
            t = float(bi / si)
            pv = student_t_sf_two_sided(t, df_resid)
        tvals.append(t)
        pvals.append(pv)

    tss = float(np.sum((y - y.mean()) ** 2))
    if tss == 0.0:
        raise StatsError("response has zero variance; R^2 undefined")
    return OlsResult(
        column_names=tuple(column_names),
        coef=tuple(float(v) for v in beta),
        stderr=tuple(float(v) for v in se),
        tvalues=tuple(tvals),
        pvalues=tuple(pvals),
        r_squared=1.0 - rss / tss,
        n_obs=n,
        df_resid=df_resid,
        rss=rss,
    )


def best_on_initial_design(
    rows: Sequence[ScoreRow],
) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Design matrix for the best-on-initial regression.

    Columns: one dummy per problem (difficulty controls), the initial score,
    and indicators for the Random and First groups. SelfEval is the baseline
    with both indicators zero.
    """
    if not rows:
        raise StatsError("no observations")
    problems = sorted({r.problem_id for r in rows})
    names = tuple(f"mu[{pid}]" for pid in problems) + (
        "alpha",
        "beta1[Random]",
        "beta2[First]",
    )
    x = np.zeros((len(rows), len(names)), dtype=np.float64)
    y = np.zeros(len(rows), dtype=np.float64)
    col_of_problem = {pid: i for i, pid in enumerate(problems)}
    for i, r in enumerate(rows):
        if r.group not in GROUPS:
            raise StatsError(f"unknown group {r.group!r}")
        x[i, col_of_problem[r.problem_id]] = 1.0
        x[i, len(problems)] = r.initial
        if r.group == "Random":
            x[i, len(problems) + 1] = 1.0
        elif r.group == "First":
            x[i, len(problems) + 2] = 1.0
        y[i] = r.best
    return x, y, names


def fit_best_on_initial(rows: Sequence[ScoreRow]) -> OlsResult:
    """Fit best = mu_problem + alpha * initial + beta1 * Random + beta2 * First."""
    x, y, names = best_on_initial_design(rows)
    return ols_fit(x, y, names)


def welch_t(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Welch's unequal-variance t-test with Welch-Satterthwaite df."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if len(av) < 2 or len(bv) < 2:
        raise StatsError("both samples need at least 2 values")
    va = float(np.var(av, ddof=1))
    vb = float(np.var(bv, ddof=1))
    if va == 0.0 and vb == 0.0:
        raise StatsError("both samples have zero variance")
    # the t denominator and the Satterthwaite df are both computed on
    # variances rescaled by their maximum: the df formula is scale-invariant
    # and the rescaling keeps subnormal variances from underflowing to 0/0
    scale = max(va, vb)
    sa = (va / scale) / len(av)
    sb = (vb / scale) / len(bv)
    t = (float(av.mean()) - float(bv.mean())) / (math.sqrt(scale) * math.sqrt(sa + sb))
    df = (sa + sb) ** 2 / (sa**2 / (len(av) - 1) + sb**2 / (len(bv) - 1))
    return TTestResult(t=t, df=df, p=student_t_sf_two_sided(t, df), method="welch")


def paired_t(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Paired t-test on elementwise differences."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.shape != bv.shape:
        raise StatsError(f"paired samples differ in length: {len(av)} vs {len(bv)}")
    if len(av) < 2:
        raise StatsError("need at least 2 pairs")
    d = av - bv
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        if float(d.mean()) == 0.0:
            return TTestResult(t=0.0, df=len(d) - 1, p=1.0, method="paired")
        raise StatsError("differences are constant and nonzero; t undefined")
    t = float(d.mean()) / (sd / math.sqrt(len(d)))
    df = len(d) - 1
    return TTestResult(t=t, df=float(df), p=student_t_sf_two_sided(t, df), method="paired")


def anova_oneway(groups: Sequence[Sequence[float]]) -> AnovaResult:
    """One-way ANOVA; p from the F survival function."""
    if len(groups) < 2:
        raise StatsError(f"need at least 2 groups, got {len(groups)}")
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    if any(len(g) < 2 for g in arrays):
        raise StatsError("every group needs at least 2 values")
    n = sum(len(g) for g in arrays)
    k = len(arrays)
    grand = float(np.concatenate(arrays).mean())
    ss_between = sum(len(g) * (float(g.mean()) - grand) ** 2 for g in arrays)
    ss_within = sum(float(np.sum((g - g.mean()) ** 2)) for g in arrays)
    df_between = k - 1
    df_within = n - k
    if ss_within == 0.0:
        raise StatsError("zero within-group variance; F undefined")
    f = (ss_between / df_between) / (ss_within / df_within)
    return AnovaResult(
        f=f, p=f_sf(f, df_between, df_within), df_between=df_between, df_within=df_within
    )


def cronbach_alpha(items: np.ndarray) -> float:
    """Cronbach's alpha for an n-respondents by k-items matrix.

    Sample variances use the n-1 denominator. Total variance of the row sums
    must be nonzero.
    """
    m = np.asarray(items, dtype=np.float64)
    if m.ndim != 2:
        raise StatsError(f"item matrix must be 2-d, got shape {m.shape}")
    n, k = m.shape
    if k < 2:
        raise StatsError(f"need at least 2 items, got {k}")
    if n < 2:
        raise StatsError(f"need at least 2 respondents, got {n}")
    item_vars = np.var(m, axis=0, ddof=1)
    total_var = float(np.var(m.sum(axis=1), ddof=1))
    if total_var == 0.0:
        raise StatsError("zero variance in row totals; alpha undefined")
    return k / (k - 1) * (1.0 - float(item_vars.sum()) / total_var)


def code_likert(
    responses: Sequence[LikertResponse],
    negative_question_ids: frozenset[str] = DEFAULT_NEGATIVE_QUESTIONS,
) -> np.ndarray:
    """Numeric vector of responses with negatively worded items negated."""
    out = np.empty(len(responses), dtype=np.float64)
    for i, r in enumerate(responses):
        flip = r.reverse_coded or r.question_id in negative_question_ids
        out[i] = -r.value if flip else r.value
    return out


def load_survey_csv(
    path,
    negative_question_ids: frozenset[str] = DEFAULT_NEGATIVE_QUESTIONS,
) -> tuple[LikertResponse, ...]:
    """Read survey responses from a CSV with columns
    student_id, group, question_id, value."""
    path = Path(path)
    required = {"student_id", "group", "question_id", "value"}
    out = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise StatsError(
                f"{path}: survey CSV must have columns {sorted(required)}, "
                f"got {reader.fieldnames}"
            )
        for line_no, row in enumerate(reader, start=2):
            raw = row["value"].strip()
            try:
                value = int(raw)
            except ValueError:
                if raw in LIKERT_LABELS:
                    value = LIKERT_LABELS[raw]
                else:
                    raise StatsError(
                        f"{path}: line {line_no}: unrecognized Likert value {raw!r}"
                    ) from None
            qid = row["question_id"].strip()
            try:
                out.append(
                    LikertResponse(
                        question_id=qid,
                        value=value,
                        reverse_coded=qid in negative_question_ids,
                        student_id=row["student_id"].strip(),
                        group=row["group"].strip(),
                    )
                )
            except StatsError as exc:
                raise StatsError(f"{path}: line {line_no}: {exc}") from None
    return tuple(out)


def load_attempt_log(path) -> tuple[Attempt, ...]:
    """Read the grading service's append-only attempt log.

    One JSON object per line with fields ts, student_id, group, problem_id,
    attempt_index, score_percent, rubric, body_hash, revealed_rubric,
    latency_ms, body_chars. Validates that attempt indices strictly increase
    and timestamps never decrease within each (student, problem) stream.

    Records with a null score (attempts accepted by a service with no grader
    loaded, possible only for the SelfEval group) carry nothing to analyze
    and are skipped.
    """
    path = Path(path)
    required = (
        "ts",
        "student_id",
        "group",
        "problem_id",
        "attempt_index",
        "score_percent",
        "rubric",
        "body_hash",
    )
    out: list[Attempt] = []
    last_seen: dict[tuple[str, str], tuple[int, float]] = {}
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StatsError(f"{path}: line {line_no}: invalid JSON: {exc}") from None
            missing = [f for f in required if f not in rec]
            if missing:
                raise StatsError(
                    f"{path}: line {line_no}: missing fields {missing}"
                )
            if rec["score_percent"] is None:
                continue
            try:
                attempt = Attempt(
                    student_id=rec["student_id"],
                    group=rec["group"],
                    problem_id=rec["problem_id"],
                    timestamp=float(rec["ts"]),
                    score_percent=float(rec["score_percent"]),
                    rubric=RubricVector(bits=tuple(rec["rubric"])),
                    body_hash=rec["body_hash"],
                    body_chars=int(rec.get("body_chars", 0)),
                )
            except (StatsError, ValueError, TypeError) as exc:
                raise StatsError(f"{path}: line {line_no}: {exc}") from None
            key = (attempt.student_id, attempt.problem_id)
            index = int(rec["attempt_index"])
            if key in last_seen:
                prev_index, prev_ts = last_seen[key]
                if index <= prev_index:
                    raise StatsError(
                        f"{path}: line {line_no}: attempt_index {index} does not "
                        f"increase (previous {prev_index}) for {key}"
                    )
                if attempt.timestamp < prev_ts:
                    raise StatsError(
                        f"{path}: line {line_no}: timestamp decreases for {key}"
                    )
            last_seen[key] = (index, attempt.timestamp)
            out.append(attempt)
    return tuple(out)


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    mean = float(v.mean())
    sd = float(np.std(v, ddof=1)) if len(v) >= 2 else 0.0
    return mean, sd


def best_score_comparisons(
    attempts: Sequence[Attempt], groups: Sequence[str] = GROUPS
) -> tuple[BestScoreComparison, ...]:
    """Per-problem comparison of best scores across groups.

    Group means and SDs plus the Kruskal-Wallis test over every group that
    has at least one observation on the problem.
    """
    rows = score_rows(attempts)
    by_problem: dict[str, dict[str, list[float]]] = defaultdict(
        lambda: {g: [] for g in groups}
    )
    for r in rows:
        by_problem[r.problem_id][r.group].append(r.best)
    out = []
    for pid in sorted(by_problem):
        per_group = by_problem[pid]
        populated = [per_group[g] for g in groups if per_group[g]]
        if len(populated) < 2:
            raise StatsError(f"problem {pid}: need at least 2 non-empty groups")
        kw = kruskal_wallis(populated)
        means = []
        sds = []
        sizes = []
        for g in groups:
            vals = per_group[g]
            if vals:
                m, s = _mean_sd(vals)
            else:
                m, s = math.nan, math.nan
            means.append(m)
            sds.append(s)
            sizes.append(len(vals))
        out.append(
            BestScoreComparison(
                problem_id=pid,
                group_means=tuple(means),
                group_sds=tuple(sds),
                group_sizes=tuple(sizes),
                h=kw.h,
                p=kw.p,
                all_identical=kw.all_identical,
            )
        )
    return tuple(out)


def _responses_by_question(
    responses: Sequence[LikertResponse],
    negative_question_ids: frozenset[str],
) -> dict[tuple[str, str], dict[str, float]]:
    """Coded value per (group, question_id), keyed by student."""
    out: dict[tuple[str, str], dict[str, float]] = defaultdict(dict)
    for r in responses:
        coded = float(code_likert([r], negative_question_ids)[0])
        out[(r.group, r.question_id)][r.student_id] = coded
    return out


def survey_pair_comparisons(
    responses: Sequence[LikertResponse],
    pairs: Sequence[tuple[str, str]] = PAIRED_QUESTION_IDS,
    groups: Sequence[str] = ("First", "Random"),
    method: str = "welch",
    negative_question_ids: frozenset[str] = DEFAULT_NEGATIVE_QUESTIONS,
) -> tuple[SurveyPairComparison, ...]:
    """Compare paired survey questions within each group.

    method selects the Welch test on the two response sets (default) or a
    paired t-test on students who answered both questions; the choice is
    recorded on every output row.
    """
    if method not in ("welch", "paired"):
        raise StatsError(f"method must be 'welch' or 'paired', got {method!r}")
    table = _responses_by_question(responses, negative_question_ids)
    out = []
    for group in groups:
        for qa, qb in pairs:
            a_by_student = table.get((group, qa), {})
            b_by_student = table.get((group, qb), {})
            if method == "paired":
                common = sorted(set(a_by_student) & set(b_by_student))
                a_vals = [a_by_student[s] for s in common]
                b_vals = [b_by_student[s] for s in common]
                res = paired_t(a_vals, b_vals)
            else:
                a_vals = list(a_by_student.values())
                b_vals = list(b_by_student.values())
                res = welch_t(a_vals, b_vals)
            out.append(
                SurveyPairComparison(
                    group=group,
                    question_a=qa,
                    question_b=qb,
                    mean_a=float(np.mean(a_vals)),
                    mean_b=float(np.mean(b_vals)),
                    t=res.t,
                    df=res.df,
                    p=res.p,
                    method=res.method,
                )
            )
    return tuple(out)


def survey_anova(
    responses: Sequence[LikertResponse],
    question_ids: Sequence[str] = ("S04", "S05", "S06", "S07"),
    groups: Sequence[str] = GROUPS,
    negative_question_ids: frozenset[str] = DEFAULT_NEGATIVE_QUESTIONS,
) -> tuple[SurveyAnovaRow, ...]:
    """One-way ANOVA across groups for each listed question, coded values."""
    table = _responses_by_question(responses, negative_question_ids)
    out = []
    for qid in question_ids:
        group_vals = [list(table.get((g, qid), {}).values()) for g in groups]
        res = anova_oneway(group_vals)
        out.append(
            SurveyAnovaRow(
                question_id=qid,
                group_means=tuple(float(np.mean(v)) for v in group_vals),
                f=res.f,
                p=res.p,
            )
        )
    return tuple(out)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_best_scores_csv(path, comparisons: Sequence[BestScoreComparison]) -> None:
    """Group mean/SD and Kruskal-Wallis results per problem."""
    path = Path(path)
    header = ["problem_id"]
    for g in GROUPS:
        header += [f"{g.lower()}_mean", f"{g.lower()}_sd"]
    header += ["H", "p"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for c in comparisons:
            row = [c.problem_id]
            for m, s in zip(c.group_means, c.group_sds):
                row += [_fmt(m), _fmt(s)]
            row += [_fmt(c.h), _fmt(c.p)]
            writer.writerow(row)


def write_ols_csv(path, result: OlsResult) -> None:
    """Coefficient table; the final row carries the R-squared."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["coefficient", "estimate", "std_err", "t", "p"])
        for name, coef, se, t, pv in zip(
            result.column_names,
            result.coef,
            result.stderr,
            result.tvalues,
            result.pvalues,
        ):
            writer.writerow([name, _fmt(coef), _fmt(se), _fmt(t), _fmt(pv)])
        writer.writerow(["R2", _fmt(result.r_squared), "", "", ""])


def write_survey_pairs_csv(path, rows: Sequence[SurveyPairComparison]) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["group", "question_a", "question_b", "mean_a", "mean_b", "t", "df", "p", "method"]
        )
        for r in rows:
            writer.writerow(
                [
                    r.group,
                    r.question_a,
                    r.question_b,
                    _fmt(r.mean_a),
                    _fmt(r.mean_b),
                    _fmt(r.t),
                    _fmt(r.df),
                    _fmt(r.p),
                    r.method,
                ]
            )


def write_survey_anova_csv(path, rows: Sequence[SurveyAnovaRow]) -> None:
    path = Path(path)
    header = ["question_id"] + [f"{g.lower()}_mean" for g in GROUPS] + ["F", "p"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in rows:
            writer.writerow(
                [r.question_id]
                + [_fmt(m) for m in r.group_means]
                + [_fmt(r.f), _fmt(r.p)]
            )
