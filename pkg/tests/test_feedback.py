import json
from collections import Counter

from hypothesis import given, strategies as st

import pytest

from proofgrader.corpus import RubricVector
from proofgrader.feedback import (
    DEFAULT_BANDS,
    DEFAULT_FAILURE_SENTENCES,
    DEFAULT_RUBRIC_DESCRIPTIONS,
    FeedbackBundle,
    GeneralBand,
    ProblemFeedback,
    Strategy,
    default_catalog,
    general_message,
    load_catalog,
    reveal_seed,
    score_percent,
    select_feedback,
)
from proofgrader.rng import PortableRng

PF = ProblemFeedback(problem_id="P1")


def vec(*bits):
    return RubricVector(bits=tuple(bits))


rubric_vectors = st.lists(st.integers(0, 1), min_size=7, max_size=7).map(
    lambda bits: RubricVector(bits=tuple(bits))
)


class TestScorePercent:
    def test_extremes(self):
        assert score_percent(vec(1, 1, 1, 1, 1, 1, 1)) == 100.0
        assert score_percent(vec(0, 0, 0, 0, 0, 0, 0)) == 0.0

    def test_five_of_seven(self):
        assert round(score_percent(vec(1, 0, 0, 1, 1, 1, 1)), 2) == 71.43

    @given(rubric_vectors)
    def test_score_times_seven_is_integer(self, rubric):
        k = score_percent(rubric) * 7 / 100
        assert abs(k - round(k)) < 1e-9
        assert 0 <= round(k) <= 7


class TestGeneralMessage:
    def test_full_credit(self):
        assert general_message(100.0, PF) == "All rubric points passed. Well done!"

    def test_almost_there_band(self):
        assert general_message(score_percent(vec(1, 0, 0, 1, 1, 1, 1)), PF) == "You are almost there."

    def test_needs_more_work_band(self):
        assert general_message(0.0, PF) == "Your proof needs more work."

    def test_boundaries_inclusive_lower_exclusive_upper(self):
        assert general_message(39.999, PF) == "Your proof needs more work."
        assert general_message(40.0, PF) == "You're making progress."
        assert general_message(69.999, PF) == "You're making progress."
        assert general_message(70.0, PF) == "You are almost there."
        assert general_message(99.999, PF) == "You are almost there."

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            general_message(-0.1, PF)
        with pytest.raises(ValueError):
            general_message(100.1, PF)


class TestCatalog:
    def test_defaults_shape(self):
        assert len(DEFAULT_RUBRIC_DESCRIPTIONS) == 7
        assert len(DEFAULT_FAILURE_SENTENCES) == 7
        assert len(DEFAULT_BANDS) == 4

    def test_r4_sentence_pinned(self):
        assert (
            DEFAULT_FAILURE_SENTENCES[3]
            == "It appears your inductive hypothesis is missing or incorrect."
        )

    def test_default_catalog(self):
        catalog = default_catalog(["P1", "P2"])
        assert catalog.for_problem("P2").problem_id == "P2"
        with pytest.raises(KeyError):
            catalog.for_problem("P9")

    def test_rejects_bad_band_order(self):
        with pytest.raises(ValueError):
            ProblemFeedback(
                problem_id="P1",
                bands=(GeneralBand(0.0, "a"), GeneralBand(70.0, "b"), GeneralBand(40.0, "c")),
            )

    def test_rejects_missing_zero_band(self):
        with pytest.raises(ValueError):
            ProblemFeedback(problem_id="P1", bands=(GeneralBand(10.0, "a"),))

    def test_rejects_wrong_sentence_count(self):
        with pytest.raises(ValueError):
            ProblemFeedback(problem_id="P1", failure_sentences=("only one",))

    def test_load_catalog_with_overrides(self, tmp_path):
        doc = {
            "problems": {
                "P1": {
                    "failure_sentences": [f"custom {i}" for i in range(7)],
                    "bands": [
                        {"threshold": 0, "message": "low"},
                        {"threshold": 50, "message": "high"},
                    ],
                },
                "P2": {},
            }
        }
        path = tmp_path / "catalog.json"
        path.write_text(json.dumps(doc))
        catalog = load_catalog(path)
        assert catalog.for_problem("P1").failure_sentences[0] == "custom 0"
        assert general_message(60.0, catalog.for_problem("P1")) == "high"
        assert catalog.for_problem("P2").failure_sentences == DEFAULT_FAILURE_SENTENCES

    def test_load_rejects_malformed(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"nope": 1}))
        with pytest.raises(ValueError):
            load_catalog(path)


class TestSelectFeedbackFirst:
    def test_reveals_lowest_index_incorrect(self):
        bundle = select_feedback(vec(1, 0, 0, 1, 1, 1, 1), Strategy.FIRST_INCORRECT, PF)
        assert bundle.revealed == (("R2", DEFAULT_FAILURE_SENTENCES[1]),)
        assert bundle.score_percent == pytest.approx(500.0 / 7.0)

    def test_r4_verbatim(self):
        bundle = select_feedback(vec(1, 1, 1, 0, 1, 1, 1), Strategy.FIRST_INCORRECT, PF)
        assert bundle.revealed == (
            ("R4", "It appears your inductive hypothesis is missing or incorrect."),
        )

    def test_all_correct_reveals_nothing(self):
        bundle = select_feedback(vec(1, 1, 1, 1, 1, 1, 1), Strategy.FIRST_INCORRECT, PF)
        assert bundle.revealed == ()
        assert bundle.general_message == "All rubric points passed. Well done!"
        assert bundle.score_percent == 100.0


class TestSelectFeedbackRandom:
    def test_requires_rng(self):
        with pytest.raises(ValueError):
            select_feedback(vec(0, 1, 1, 1, 1, 1, 1), Strategy.RANDOM_INCORRECT, PF)

    def test_r4_verbatim(self):
        bundle = select_feedback(
            vec(1, 1, 1, 0, 1, 1, 1), Strategy.RANDOM_INCORRECT, PF, rng=PortableRng(1)
        )
        assert bundle.revealed == (
            ("R4", "It appears your inductive hypothesis is missing or incorrect."),
        )

    def test_uniform_over_incorrect(self):
        # two incorrect rubrics: R2 and R3; chi-square over 10k seeded draws
        counts = Counter()
        for seed in range(10000):
            bundle = select_feedback(
                vec(1, 0, 0, 1, 1, 1, 1), Strategy.RANDOM_INCORRECT, PF, rng=PortableRng(seed)
            )
            counts[bundle.revealed[0][0]] += 1
        assert set(counts) == {"R2", "R3"}
        n, k = 10000, 2
        expected = n / k
        chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
        # chi-square with 1 df: 3 sigma-ish bound is ~9
        assert chi2 < 9.0

    def test_uniform_over_many_incorrect(self):
        counts = Counter()
        for seed in range(14000):
            bundle = select_feedback(
                vec(0, 0, 0, 0, 0, 0, 0), Strategy.RANDOM_INCORRECT, PF, rng=PortableRng(seed)
            )
            counts[bundle.revealed[0][0]] += 1
        assert set(counts) == {f"R{i}" for i in range(1, 8)}
        expected = 14000 / 7
        chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
        # chi-square with 6 df: mean 6, sd sqrt(12); 16.8 is ~3 sigma
        assert chi2 < 17.0

    def test_deterministic_given_seed(self):
        a = select_feedback(vec(0, 0, 1, 1, 0, 1, 1), Strategy.RANDOM_INCORRECT, PF, PortableRng(9))
        b = select_feedback(vec(0, 0, 1, 1, 0, 1, 1), Strategy.RANDOM_INCORRECT, PF, PortableRng(9))
        assert a == b


class TestSelectFeedbackSelfEval:
    def test_no_score_no_reveal_full_checklist(self):
        bundle = select_feedback(vec(1, 0, 0, 1, 1, 1, 1), Strategy.SELF_EVAL, PF)
        assert bundle.score_percent is None
        assert bundle.general_message is None
        assert bundle.revealed == ()
        assert bundle.checklist == DEFAULT_RUBRIC_DESCRIPTIONS

    def test_bundle_invariant_enforced(self):
        with pytest.raises(ValueError):
            FeedbackBundle(
                mode=Strategy.SELF_EVAL,
                score_percent=50.0,
                general_message=None,
                revealed=(),
                checklist=(),
            )


class TestRevealSeed:
    def test_stable_and_sensitive(self):
        s = reveal_seed("alice", "P1", "ab" * 32)
        assert s == reveal_seed("alice", "P1", "ab" * 32)
        assert s != reveal_seed("bob", "P1", "ab" * 32)
        assert s != reveal_seed("alice", "P2", "ab" * 32)
        assert s != reveal_seed("alice", "P1", "cd" * 32)

    def test_bytes_and_hex_agree(self):
        raw = bytes(range(32))
        assert reveal_seed("a", "P1", raw) == reveal_seed("a", "P1", raw.hex())


class TestNeverRevealsCorrect:
    @given(rubric_vectors, st.integers(0, 2**32))
    def test_reveal_strategies(self, rubric, seed):
        for strategy in (Strategy.FIRST_INCORRECT, Strategy.RANDOM_INCORRECT):
            bundle = select_feedback(rubric, strategy, PF, rng=PortableRng(seed))
            for rubric_id, _ in bundle.revealed:
                k = int(rubric_id[1]) - 1
                assert rubric.bits[k] == 0

    @given(rubric_vectors)
    def test_strategy_values_match_group_labels(self, rubric):
        assert Strategy("First") is Strategy.FIRST_INCORRECT
        assert Strategy("Random") is Strategy.RANDOM_INCORRECT
        assert Strategy("SelfEval") is Strategy.SELF_EVAL
