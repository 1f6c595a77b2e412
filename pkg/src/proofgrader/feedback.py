"""Strategy-driven feedback assembly from rubric verdicts.

Three experimental strategies: First reveals the lowest-index failed rubric,
Random reveals a uniformly drawn failed rubric with a seeded portable
generator, and SelfEval returns only the rubric checklist with no machine
verdict at all (no score, no reveals).

The general-message band thresholds and six of the seven failure sentences
are artifact defaults (catalog-overridable); the R4 sentence is fixed
verbatim, and every band message can be replaced per problem via the catalog
file, a JSON document keyed by problem id.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

from . import NUM_RUBRICS, RUBRIC_IDS
from .corpus import RubricVector
from .rng import PortableRng, seed_from_string


class Strategy(enum.Enum):
    SELF_EVAL = "SelfEval"
    FIRST_INCORRECT = "First"
    RANDOM_INCORRECT = "Random"


DEFAULT_RUBRIC_DESCRIPTIONS = (
    "Identifying the base case(s)",
    "Proving the base case(s)",
    "Stating the inductive hypothesis",
    "Setting the bound of the inductive hypothesis",
    "Stating the goal of the inductive step",
    "Breaking down the inductive step",
    "Applying the inductive hypothesis",
)

DEFAULT_FAILURE_SENTENCES = (
    "It appears your identification of the base case(s) is missing or incorrect.",
    "It appears your proof of the base case(s) is missing or incorrect.",
    "It appears your statement of the inductive hypothesis is missing or incorrect.",
    "It appears your inductive hypothesis is missing or incorrect.",
    "It appears your goal of the inductive step is missing or incorrect.",
    "It appears your breakdown of the inductive step is missing or incorrect.",
    "It appears your application of the inductive hypothesis is missing or incorrect.",
)


@dataclass(frozen=True)
class GeneralBand:
    threshold: float
    message: str


DEFAULT_BANDS = (
    GeneralBand(0.0, "Your proof needs more work."),
    GeneralBand(40.0, "You're making progress."),
    GeneralBand(70.0, "You are almost there."),
    GeneralBand(100.0, "All rubric points passed. Well done!"),
)


@dataclass(frozen=True)
class ProblemFeedback:
    problem_id: str
    rubric_descriptions: tuple[str, ...] = DEFAULT_RUBRIC_DESCRIPTIONS
    failure_sentences: tuple[str, ...] = DEFAULT_FAILURE_SENTENCES
    bands: tuple[GeneralBand, ...] = DEFAULT_BANDS

    def __post_init__(self):
        if len(self.rubric_descriptions) != NUM_RUBRICS:
            raise ValueError(
                f"{self.problem_id}: need {NUM_RUBRICS} rubric descriptions, "
                f"got {len(self.rubric_descriptions)}"
            )
        if len(self.failure_sentences) != NUM_RUBRICS:
            raise ValueError(
                f"{self.problem_id}: need {NUM_RUBRICS} failure sentences, "
                f"got {len(self.failure_sentences)}"
            )
        if not self.bands:
            raise ValueError(f"{self.problem_id}: bands must be nonempty")
        thresholds = [b.threshold for b in self.bands]
        if thresholds[0] != 0.0:
            raise ValueError(f"{self.problem_id}: first band must start at 0")
        if thresholds != sorted(thresholds) or len(set(thresholds)) != len(thresholds):
            raise ValueError(f"{self.problem_id}: band thresholds must strictly ascend")
        if thresholds[-1] > 100.0:
            raise ValueError(f"{self.problem_id}: band threshold above 100")


@dataclass(frozen=True)
class FeedbackCatalog:
    problems: dict[str, ProblemFeedback]

    def for_problem(self, problem_id: str) -> ProblemFeedback:
        if problem_id not in self.problems:
            raise KeyError(f"no feedback catalog entry for problem {problem_id!r}")
        return self.problems[problem_id]


@dataclass(frozen=True)
class FeedbackBundle:
    mode: Strategy
    score_percent: float | None
    general_message: str | None
    revealed: tuple[tuple[str, str], ...]
    checklist: tuple[str, ...]

    def __post_init__(self):
        if self.mode is Strategy.SELF_EVAL:
            if self.score_percent is not None or self.revealed:
                raise ValueError("SelfEval bundles carry no score and no reveals")
        else:
            if self.score_percent is None or self.checklist:
                raise ValueError("treatment bundles carry a score and no checklist")
        if len(self.revealed) > 1:
            raise ValueError("at most one rubric is revealed per attempt")


def default_catalog(problem_ids) -> FeedbackCatalog:
    return FeedbackCatalog(problems={pid: ProblemFeedback(problem_id=pid) for pid in problem_ids})


def load_catalog(path) -> FeedbackCatalog:
    """Read a JSON catalog; omitted fields fall back to the defaults."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or not isinstance(doc.get("problems"), dict):
        raise ValueError("catalog must be an object with a 'problems' mapping")
    problems = {}
    for pid, entry in doc["problems"].items():
        kwargs = {"problem_id": pid}
        if "rubric_descriptions" in entry:
            kwargs["rubric_descriptions"] = tuple(entry["rubric_descriptions"])
        if "failure_sentences" in entry:
            kwargs["failure_sentences"] = tuple(entry["failure_sentences"])
        if "bands" in entry:
            kwargs["bands"] = tuple(
                GeneralBand(threshold=float(b["threshold"]), message=str(b["message"]))
                for b in entry["bands"]
            )
        problems[pid] = ProblemFeedback(**kwargs)
    return FeedbackCatalog(problems=problems)


def score_percent(rubric: RubricVector) -> float:
    """Student-facing percentage: 100 * passed / 7."""
    return 100.0 * rubric.num_correct / NUM_RUBRICS


def general_message(score: float, feedback: ProblemFeedback) -> str:
    """Message of the band containing the score.

    Bands are inclusive-lower and exclusive-upper; the top band is inclusive,
    so a score equal to the last threshold (normally 100) lands there.
    """
    if not (0.0 <= score <= 100.0):
        raise ValueError(f"score {score} outside [0, 100]")
    chosen = None
    for band in feedback.bands:
        if score >= band.threshold:
            chosen = band
    return chosen.message


def reveal_seed(student_id: str, problem_id: str, body_hash) -> int:
    """Random-strategy seed for one attempt.

    Derived from the submission content hash rather than the attempt index,
    so resubmitting identical text reveals the same rubric and resubmission
    cannot be used to farm extra reveals.
    """
    if isinstance(body_hash, bytes):
        body_hash = body_hash.hex()
    return seed_from_string("\x00".join([student_id, problem_id, body_hash]))


def select_feedback(
    rubric: RubricVector,
    strategy: Strategy,
    feedback: ProblemFeedback,
    rng: PortableRng | None = None,
) -> FeedbackBundle:
    """Build the student-facing bundle for one graded attempt.

    Random needs a seeded generator (see reveal_seed); First and SelfEval
    ignore it. An all-correct vector under a reveal strategy produces an
    empty reveal list and the top band's congratulation message.
    """
    if strategy is Strategy.SELF_EVAL:
        return FeedbackBundle(
            mode=strategy,
            score_percent=None,
            general_message=None,
            revealed=(),
            checklist=feedback.rubric_descriptions,
        )
    score = score_percent(rubric)
    message = general_message(score, feedback)
    incorrect = [k for k, bit in enumerate(rubric.bits) if bit == 0]
    revealed: tuple[tuple[str, str], ...] = ()
    if incorrect:
        if strategy is Strategy.FIRST_INCORRECT:
            k = incorrect[0]
        else:
            if rng is None:
                raise ValueError("the Random strategy requires a seeded generator")
            k = incorrect[rng.below(len(incorrect))]
        revealed = ((RUBRIC_IDS[k], feedback.failure_sentences[k]),)
    return FeedbackBundle(
        mode=strategy,
        score_percent=score,
        general_message=message,
        revealed=revealed,
        checklist=(),
    )
