"""Tests for the study statistics module.

Where a second trustworthy implementation exists (scipy, numpy lstsq), the
tests use it as an independent oracle; the hand-computable cases are worked
out inline from the defining formulas.
"""

import csv
import json
import math
import statistics

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from proofgrader.corpus import RubricVector
from proofgrader.studystats import (
    GROUPS,
    Attempt,
    BestScoreComparison,
    LikertResponse,
    RankDeficiencyError,
    ScoreRow,
    StatsError,
    anova_oneway,
    best_on_initial_design,
    best_score_comparisons,
    code_likert,
    cronbach_alpha,
    fit_best_on_initial,
    initial_best,
    kruskal_wallis,
    load_attempt_log,
    load_survey_csv,
    mannwhitney_u,
    ols_fit,
    paired_t,
    posthoc_pairwise,
    score_rows,
    screen_effort,
    survey_anova,
    survey_pair_comparisons,
    welch_t,
    write_best_scores_csv,
    write_ols_csv,
    write_survey_anova_csv,
    write_survey_pairs_csv,
)


def rubric_with(k: int) -> RubricVector:
    return RubricVector(bits=tuple(1 if i < k else 0 for i in range(7)))


def score_of(k: int) -> float:
    return 100.0 * k / 7.0


def make_attempt(sid, pid, ts, k, group="First", chars=100, body_hash="h0"):
    return Attempt(
        student_id=sid,
        group=group,
        problem_id=pid,
        timestamp=ts,
        score_percent=score_of(k),
        rubric=rubric_with(k),
        body_hash=body_hash,
        body_chars=chars,
    )


class TestAttemptValidation:
    def test_valid(self):
        a = make_attempt("s1", "P1", 0.0, 3)
        assert a.score_percent == pytest.approx(300 / 7)

    def test_unknown_group(self):
        with pytest.raises(StatsError, match="group"):
            make_attempt("s1", "P1", 0.0, 3, group="Control")

    def test_score_rubric_mismatch(self):
        with pytest.raises(StatsError, match="inconsistent"):
            Attempt(
                student_id="s1",
                group="First",
                problem_id="P1",
                timestamp=0.0,
                score_percent=50.0,
                rubric=rubric_with(3),
                body_hash="h",
                body_chars=10,
            )

    def test_negative_body_chars(self):
        with pytest.raises(StatsError, match="body_chars"):
            make_attempt("s1", "P1", 0.0, 3, chars=-1)


class TestScreenEffort:
    def test_trivial_text_on_all_problems_excluded(self):
        attempts = [
            make_attempt("s1", pid, float(i), 0, chars=5)
            for i, pid in enumerate(["P1", "P2", "P3"])
        ]
        screen = screen_effort(attempts)
        assert screen.included == ()
        assert "s1" in screen.excluded
        assert "20" in screen.excluded["s1"]

    def test_one_substantive_proof_included(self):
        attempts = [
            make_attempt("s1", "P1", 0.0, 0, chars=5),
            make_attempt("s1", "P2", 1.0, 4, chars=250),
        ]
        screen = screen_effort(attempts)
        assert screen.included == ("s1",)
        assert screen.excluded == {}

    def test_zero_attempts_excluded_as_blank(self):
        screen = screen_effort([], roster=["ghost"])
        assert screen.included == ()
        assert screen.excluded == {"ghost": "no attempts submitted"}

    def test_threshold_boundary(self):
        at_threshold = [make_attempt("s1", "P1", 0.0, 1, chars=20)]
        below = [make_attempt("s2", "P1", 0.0, 1, chars=19)]
        assert screen_effort(at_threshold).included == ("s1",)
        assert screen_effort(below).included == ()

    def test_custom_min_chars(self):
        attempts = [make_attempt("s1", "P1", 0.0, 1, chars=30)]
        assert screen_effort(attempts, min_chars=31).included == ()

    def test_included_sorted(self):
        attempts = [
            make_attempt("zed", "P1", 0.0, 1, chars=100),
            make_attempt("abe", "P1", 0.0, 1, chars=100),
        ]
        assert screen_effort(attempts).included == ("abe", "zed")


class TestInitialBest:
    def test_first_and_max(self):
        attempts = [
            make_attempt("s1", "P1", 0.0, 2),
            make_attempt("s1", "P1", 1.0, 4),
            make_attempt("s1", "P1", 2.0, 3),
        ]
        pair = initial_best(attempts)[("s1", "P1")]
        assert pair.initial == pytest.approx(score_of(2))
        assert pair.best == pytest.approx(score_of(4))

    def test_single_attempt(self):
        pair = initial_best([make_attempt("s1", "P1", 0.0, 7)])[("s1", "P1")]
        assert pair.initial == pair.best == 100.0

    def test_unsorted_input_is_sorted_by_timestamp(self):
        attempts = [
            make_attempt("s1", "P1", 5.0, 6),
            make_attempt("s1", "P1", 1.0, 1),
        ]
        pair = initial_best(attempts)[("s1", "P1")]
        assert pair.initial == pytest.approx(score_of(1))

    def test_streams_are_independent(self):
        attempts = [
            make_attempt("s1", "P1", 0.0, 1),
            make_attempt("s1", "P2", 0.0, 5),
            make_attempt("s2", "P1", 0.0, 3),
        ]
        out = initial_best(attempts)
        assert len(out) == 3
        assert out[("s2", "P1")].best == pytest.approx(score_of(3))

    @given(ks=st.lists(st.integers(min_value=0, max_value=7), min_size=1, max_size=10))
    @settings(max_examples=50, deadline=None)
    def test_best_dominates_initial(self, ks):
        attempts = [make_attempt("s", "P1", float(i), k) for i, k in enumerate(ks)]
        pair = initial_best(attempts)[("s", "P1")]
        assert pair.best >= pair.initial


class TestKruskalWallis:
    def test_hand_oracle_no_ties(self):
        # Ranks 1..9 split consecutively: rank sums 6, 15, 24, so
        # H = 12/(9*10) * (36/3 + 225/3 + 576/3) - 3*10 = 7.2 exactly.
        res = kruskal_wallis([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        assert res.h == pytest.approx(7.2, abs=1e-12)
        assert res.df == 2
        assert not res.all_identical
        assert res.p == pytest.approx(scipy.stats.chi2.sf(7.2, 2), abs=1e-12)

    def test_all_identical_flagged(self):
        res = kruskal_wallis([[5.0, 5.0], [5.0], [5.0, 5.0]])
        assert res.h == 0.0
        assert res.p == 1.0
        assert res.all_identical

    def test_ties_match_scipy(self):
        groups = [[1, 2, 2, 3], [2, 3, 3, 4, 4], [1, 1, 5, 5]]
        res = kruskal_wallis(groups)
        expected_h, expected_p = scipy.stats.kruskal(*groups)
        assert res.h == pytest.approx(expected_h, abs=1e-12)
        assert res.p == pytest.approx(expected_p, abs=1e-10)

    def test_needs_two_groups_and_three_values(self):
        with pytest.raises(StatsError):
            kruskal_wallis([[1, 2, 3]])
        with pytest.raises(StatsError):
            kruskal_wallis([[1], []])
        with pytest.raises(StatsError):
            kruskal_wallis([[1], [2]])

    @given(
        shift=st.floats(min_value=-50, max_value=50),
        scale=st.floats(min_value=0.1, max_value=10),
    )
    @settings(max_examples=40, deadline=None)
    def test_invariant_under_monotone_transform(self, shift, scale):
        groups = [[1.0, 4.0, 2.0], [3.0, 8.0, 2.0], [9.0, 5.0, 7.0]]
        base = kruskal_wallis(groups)
        exp_transformed = [[math.exp(scale * v / 10 + shift / 50) for v in g] for g in groups]
        affine_transformed = [[scale * v + shift for v in g] for g in groups]
        assert kruskal_wallis(exp_transformed).h == pytest.approx(base.h, abs=1e-9)
        assert kruskal_wallis(affine_transformed).h == pytest.approx(base.h, abs=1e-9)


class TestMannWhitney:
    def test_matches_scipy_asymptotic(self):
        a = [1.0, 2.5, 3.0, 4.0, 7.0, 7.0]
        b = [2.5, 5.0, 6.0, 8.0, 9.0]
        res = mannwhitney_u(a, b)
        expected = scipy.stats.mannwhitneyu(
            a, b, alternative="two-sided", method="asymptotic", use_continuity=True
        )
        assert res.p == pytest.approx(expected.pvalue, abs=1e-12)
        # Our U is the smaller of the two directed statistics.
        u1 = expected.statistic
        assert res.u == pytest.approx(min(u1, len(a) * len(b) - u1), abs=1e-12)

    def test_symmetry_in_arguments(self):
        a, b = [1, 2, 3, 10], [4, 5, 6]
        assert mannwhitney_u(a, b).p == pytest.approx(mannwhitney_u(b, a).p, abs=1e-14)
        assert mannwhitney_u(a, b).u == pytest.approx(mannwhitney_u(b, a).u, abs=1e-14)

    def test_identical_values_degenerate(self):
        res = mannwhitney_u([3, 3, 3], [3, 3])
        assert res.p == 1.0

    def test_separated_samples_small_p(self):
        res = mannwhitney_u(list(range(10)), list(range(100, 110)))
        assert res.u == 0.0
        assert res.p < 0.001


class TestPosthocPairwise:
    def test_three_groups_three_comparisons(self):
        groups = {
            "SelfEval": [1.0, 2.0, 3.0, 2.5, 1.5],
            "Random": [10.0, 11.0, 12.0, 11.5, 10.5],
            "First": [10.2, 11.2, 12.2, 11.0, 10.8],
        }
        out = posthoc_pairwise(groups)
        assert len(out) == 3
        assert [(c.group_a, c.group_b) for c in out] == [
            ("SelfEval", "Random"),
            ("SelfEval", "First"),
            ("Random", "First"),
        ]
        for c in out:
            assert c.p_adjusted == pytest.approx(min(1.0, c.p_raw * 3), abs=1e-15)
        separated = [c for c in out if "SelfEval" in (c.group_a, c.group_b)]
        overlapping = [c for c in out if "SelfEval" not in (c.group_a, c.group_b)]
        assert all(c.p_adjusted < 0.05 for c in separated)
        assert all(c.p_adjusted > 0.1 for c in overlapping)

    def test_single_group_rejected(self):
        with pytest.raises(StatsError):
            posthoc_pairwise({"only": [1, 2, 3]})


class TestOlsFit:
    def test_noiseless_recovery(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(60, 5))
        beta = np.array([1.5, -2.0, 0.0, 3.25, 0.5])
        y = x @ beta
        res = ols_fit(x, y, [f"c{i}" for i in range(5)])
        assert np.allclose(res.coef, beta, atol=1e-9)
        assert res.r_squared == pytest.approx(1.0, abs=1e-9)

    def test_residuals_orthogonal_to_design(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(80, 4))
        y = x @ np.array([2.0, -1.0, 0.5, 4.0]) + rng.normal(size=80)
        res = ols_fit(x, y, list("abcd"))
        residuals = y - x @ np.array(res.coef)
        assert np.max(np.abs(x.T @ residuals)) < 1e-9

    def test_matches_lstsq_and_closed_form_inference(self):
        rng = np.random.default_rng(5)
        n, p = 120, 4
        x = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
        y = x @ np.array([3.0, 1.0, -2.0, 0.25]) + rng.normal(size=n) * 2.0
        res = ols_fit(x, y, ["const", "x1", "x2", "x3"])

        expected_beta = np.linalg.lstsq(x, y, rcond=None)[0]
        assert np.allclose(res.coef, expected_beta, atol=1e-10)

        resid = y - x @ expected_beta
        sigma_sq = resid @ resid / (n - p)
        cov = sigma_sq * np.linalg.inv(x.T @ x)
        assert np.allclose(res.stderr, np.sqrt(np.diag(cov)), atol=1e-10)
        for t, pv in zip(res.tvalues, res.pvalues):
            assert pv == pytest.approx(2 * scipy.stats.t.sf(abs(t), n - p), abs=1e-12)

        ss_res = float(resid @ resid)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        assert res.r_squared == pytest.approx(1 - ss_res / ss_tot, abs=1e-12)

    def test_rank_deficiency_names_offending_column(self):
        rng = np.random.default_rng(9)
        base = rng.normal(size=(30, 2))
        x = np.column_stack([base, base[:, 0]])
        with pytest.raises(RankDeficiencyError) as exc_info:
            ols_fit(x, rng.normal(size=30), ["keep0", "keep1", "dup_of_0"])
        assert exc_info.value.column_name == "dup_of_0"
        assert exc_info.value.column_index == 2

    def test_more_parameters_than_rows_rejected(self):
        with pytest.raises(StatsError, match="observations"):
            ols_fit(np.ones((3, 3)), np.ones(3), list("abc"))

    def test_shape_mismatches_rejected(self):
        with pytest.raises(StatsError):
            ols_fit(np.ones((10, 2)), np.ones(9), ["a", "b"])
        with pytest.raises(StatsError):
            ols_fit(np.ones((10, 2)), np.ones(10), ["a"])


class TestBestOnInitialRegression:
    @staticmethod
    def synthetic_rows(rng, n_students=60, noise=0.0):
        mu = {"P1": 26.5, "P2": 20.2, "P3": 20.0}
        alpha, beta1, beta2 = 0.7, 11.3, 11.6
        rows = []
        for i in range(n_students):
            group = GROUPS[i % 3]
            g1 = 1.0 if group == "Random" else 0.0
            g2 = 1.0 if group == "First" else 0.0
            for pid in mu:
                initial = float(rng.uniform(0, 100))
                best = (
                    mu[pid]
                    + alpha * initial
                    + beta1 * g1
                    + beta2 * g2
                    + noise * float(rng.normal())
                )
                rows.append(
                    ScoreRow(
                        student_id=f"s{i}",
                        group=group,
                        problem_id=pid,
                        initial=initial,
                        best=best,
                    )
                )
        return rows

    def test_design_matrix_layout(self):
        rows = [
            ScoreRow("s1", "SelfEval", "P2", 10.0, 20.0),
            ScoreRow("s2", "Random", "P1", 30.0, 50.0),
            ScoreRow("s3", "First", "P1", 5.0, 45.0),
        ]
        x, y, names = best_on_initial_design(rows)
        assert names == ("mu[P1]", "mu[P2]", "alpha", "beta1[Random]", "beta2[First]")
        assert x[0].tolist() == [0.0, 1.0, 10.0, 0.0, 0.0]
        assert x[1].tolist() == [1.0, 0.0, 30.0, 1.0, 0.0]
        assert x[2].tolist() == [1.0, 0.0, 5.0, 0.0, 1.0]
        assert y.tolist() == [20.0, 50.0, 45.0]

    def test_noiseless_coefficients_recovered(self):
        rows = self.synthetic_rows(np.random.default_rng(2), noise=0.0)
        res = fit_best_on_initial(rows)
        assert res.coefficient("alpha") == pytest.approx(0.7, abs=1e-9)
        assert res.coefficient("beta1[Random]") == pytest.approx(11.3, abs=1e-9)
        assert res.coefficient("beta2[First]") == pytest.approx(11.6, abs=1e-9)
        assert res.coefficient("mu[P1]") == pytest.approx(26.5, abs=1e-9)

    def test_null_betas_within_noise_bounds(self):
        rng = np.random.default_rng(17)
        rows = []
        for i in range(90):
            group = GROUPS[i % 3]
            for pid in ("P1", "P2"):
                initial = float(rng.uniform(0, 100))
                best = 10.0 + 0.5 * initial + 5.0 * float(rng.normal())
                rows.append(ScoreRow(f"s{i}", group, pid, initial, best))
        res = fit_best_on_initial(rows)
        for name in ("beta1[Random]", "beta2[First]"):
            idx = res.column_names.index(name)
            assert abs(res.coef[idx]) < 4 * res.stderr[idx]


class TestWelchT:
    def test_same_values_t_zero_p_one(self):
        vals = [1.0, 2.0, 3.0, 4.0]
        res = welch_t(vals, list(vals))
        assert res.t == 0.0
        assert res.p == 1.0

    def test_separation_tiny_p(self):
        a = [0.0, 0.001, -0.001, 0.0005]
        b = [1.0, 1.001, 0.999, 1.0005]
        res = welch_t(a, b)
        assert abs(res.t) > 100
        assert res.p < 1e-6

    def test_matches_scipy(self):
        rng = np.random.default_rng(23)
        a = rng.normal(0.0, 1.0, size=12).tolist()
        b = rng.normal(0.7, 2.0, size=9).tolist()
        res = welch_t(a, b)
        expected = scipy.stats.ttest_ind(a, b, equal_var=False)
        assert res.t == pytest.approx(expected.statistic, abs=1e-12)
        assert res.p == pytest.approx(expected.pvalue, abs=1e-12)

    def test_welch_satterthwaite_df(self):
        a = [1.0, 2.0, 3.0, 4.0, 5.0]
        b = [2.0, 4.0, 6.0]
        res = welch_t(a, b)
        sa = statistics.variance(a) / len(a)
        sb = statistics.variance(b) / len(b)
        expected_df = (sa + sb) ** 2 / (sa**2 / 4 + sb**2 / 2)
        assert res.df == pytest.approx(expected_df, abs=1e-12)

    def test_degenerate_rejected(self):
        with pytest.raises(StatsError):
            welch_t([1.0, 1.0], [2.0, 2.0])
        with pytest.raises(StatsError):
            welch_t([1.0], [2.0, 3.0])

    @given(
        a=st.lists(st.floats(min_value=-10, max_value=10), min_size=3, max_size=8),
        b=st.lists(st.floats(min_value=-10, max_value=10), min_size=3, max_size=8),
    )
    @settings(max_examples=50, deadline=None)
    def test_antisymmetric(self, a, b):
        if statistics.variance(a) == 0.0 and statistics.variance(b) == 0.0:
            return
        fwd = welch_t(a, b)
        rev = welch_t(b, a)
        assert fwd.t == pytest.approx(-rev.t, abs=1e-12)
        assert fwd.p == pytest.approx(rev.p, abs=1e-12)
        assert fwd.df == pytest.approx(rev.df, abs=1e-12)


class TestPairedT:
    def test_matches_scipy(self):
        a = [3.1, 4.2, 5.0, 6.3, 2.2]
        b = [2.9, 4.9, 4.1, 6.6, 1.0]
        res = paired_t(a, b)
        expected = scipy.stats.ttest_rel(a, b)
        assert res.t == pytest.approx(expected.statistic, abs=1e-12)
        assert res.p == pytest.approx(expected.pvalue, abs=1e-12)
        assert res.df == len(a) - 1
        assert res.method == "paired"

    def test_identical_pairs(self):
        res = paired_t([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert res.t == 0.0
        assert res.p == 1.0

    def test_length_mismatch(self):
        with pytest.raises(StatsError, match="length"):
            paired_t([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_constant_nonzero_differences_rejected(self):
        with pytest.raises(StatsError):
            paired_t([2.0, 3.0, 4.0], [1.0, 2.0, 3.0])


class TestAnova:
    def test_hand_oracle(self):
        groups = [[0.0, 0.0, 1.0], [10.0, 10.0, 11.0], [20.0, 20.0, 21.0]]
        means = [sum(g) / 3 for g in groups]
        grand = sum(sum(g) for g in groups) / 9
        ss_between = sum(3 * (m - grand) ** 2 for m in means)
        ss_within = sum((v - m) ** 2 for g, m in zip(groups, means) for v in g)
        expected_f = (ss_between / 2) / (ss_within / 6)
        res = anova_oneway(groups)
        assert res.f == pytest.approx(expected_f, abs=1e-10)
        assert res.f > 100
        assert res.p < 0.01
        assert (res.df_between, res.df_within) == (2, 6)

    def test_matches_scipy(self):
        rng = np.random.default_rng(31)
        groups = [rng.normal(loc, 1.0, size=8).tolist() for loc in (0.0, 0.3, 1.1)]
        res = anova_oneway(groups)
        expected = scipy.stats.f_oneway(*groups)
        assert res.f == pytest.approx(expected.statistic, abs=1e-12)
        assert res.p == pytest.approx(expected.pvalue, abs=1e-10)

    def test_near_identical_groups_small_f(self):
        rng = np.random.default_rng(41)
        groups = [(5.0 + rng.normal(0, 0.1, size=10)).tolist() for _ in range(3)]
        res = anova_oneway(groups)
        assert res.p > 0.1

    def test_degenerate_inputs(self):
        with pytest.raises(StatsError):
            anova_oneway([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(StatsError):
            anova_oneway([[1.0], [2.0, 3.0]])
        with pytest.raises(StatsError):
            anova_oneway([[1.0, 2.0]])


class TestCronbachAlpha:
    def test_identical_columns_give_one(self):
        col = np.array([1.0, 3.0, 2.0, 5.0])
        m = np.column_stack([col, col, col])
        assert cronbach_alpha(m) == pytest.approx(1.0, abs=1e-12)

    def test_hand_computed_small_case(self):
        m = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 5.0], [4.0, 9.0]])
        item_vars = [statistics.variance(m[:, j]) for j in range(2)]
        total_var = statistics.variance(m.sum(axis=1))
        expected = 2.0 * (1.0 - sum(item_vars) / total_var)
        assert cronbach_alpha(m) == pytest.approx(expected, abs=1e-12)

    def test_independent_columns_near_zero(self):
        rng = np.random.default_rng(13)
        m = rng.normal(size=(4000, 6))
        assert abs(cronbach_alpha(m)) < 0.1

    @given(shift=st.floats(min_value=-100, max_value=100))
    @settings(max_examples=40, deadline=None)
    def test_invariant_under_column_shift(self, shift):
        m = np.array([[1.0, 2.0, 0.0], [2.0, 1.0, 1.0], [4.0, 3.0, 1.0], [3.0, 5.0, 2.0]])
        shifted = m.copy()
        shifted[:, 1] += shift
        assert cronbach_alpha(shifted) == pytest.approx(cronbach_alpha(m), abs=1e-9)

    def test_degenerate_inputs(self):
        with pytest.raises(StatsError):
            cronbach_alpha(np.array([[1.0], [2.0]]))
        with pytest.raises(StatsError):
            cronbach_alpha(np.array([[1.0, 2.0]]))
        with pytest.raises(StatsError):
            cronbach_alpha(np.array([[1.0, -1.0], [2.0, -2.0], [3.0, -3.0]]))


class TestLikert:
    def test_negative_item_negated(self):
        r = LikertResponse(question_id="S04", value=2)
        assert code_likert([r]).tolist() == [-2.0]

    def test_neutral_unchanged(self):
        assert code_likert([LikertResponse("S04", 0)]).tolist() == [0.0]
        assert code_likert([LikertResponse("S01", 0)]).tolist() == [0.0]

    def test_positive_item_unchanged(self):
        assert code_likert([LikertResponse("S01", 1)]).tolist() == [1.0]

    def test_reverse_coded_flag_respected(self):
        r = LikertResponse(question_id="S99", value=1, reverse_coded=True)
        assert code_likert([r]).tolist() == [-1.0]

    def test_value_range_enforced(self):
        with pytest.raises(StatsError):
            LikertResponse(question_id="S01", value=3)
        with pytest.raises(StatsError):
            LikertResponse(question_id="S01", value=-3)


class TestSurveyCsv:
    def test_roundtrip_with_labels_and_numbers(self, tmp_path):
        path = tmp_path / "survey.csv"
        path.write_text(
            "student_id,group,question_id,value\n"
            "s1,First,S01,2\n"
            "s1,First,S04,Disagree\n"
            "s2,Random,S08,Strongly agree\n",
            encoding="utf-8",
        )
        rows = load_survey_csv(path)
        assert len(rows) == 3
        assert rows[0].value == 2 and not rows[0].reverse_coded
        assert rows[1].value == -1 and rows[1].reverse_coded
        assert rows[2].value == 2 and rows[2].group == "Random"

    def test_bad_value_reports_line(self, tmp_path):
        path = tmp_path / "survey.csv"
        path.write_text(
            "student_id,group,question_id,value\ns1,First,S01,maybe\n",
            encoding="utf-8",
        )
        with pytest.raises(StatsError, match="line 2"):
            load_survey_csv(path)

    def test_out_of_range_value_reports_line(self, tmp_path):
        path = tmp_path / "survey.csv"
        path.write_text(
            "student_id,group,question_id,value\ns1,First,S01,1\ns2,First,S01,7\n",
            encoding="utf-8",
        )
        with pytest.raises(StatsError, match="line 3"):
            load_survey_csv(path)

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "survey.csv"
        path.write_text("student_id,question_id,value\ns1,S01,1\n", encoding="utf-8")
        with pytest.raises(StatsError, match="columns"):
            load_survey_csv(path)


def log_record(sid, pid, index, ts, k, group="First", chars=50):
    return {
        "ts": ts,
        "student_id": sid,
        "group": group,
        "problem_id": pid,
        "attempt_index": index,
        "score_percent": score_of(k),
        "rubric": list(rubric_with(k).bits),
        "body_hash": "ab" * 32,
        "revealed_rubric": None,
        "latency_ms": 12.5,
        "body_chars": chars,
    }


def write_log(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


class TestAttemptLog:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "attempts.log"
        write_log(
            path,
            [
                log_record("s1", "P1", 1, 100.0, 2),
                log_record("s1", "P1", 2, 101.0, 4),
                log_record("s2", "P2", 1, 100.5, 7, group="Random"),
            ],
        )
        attempts = load_attempt_log(path)
        assert len(attempts) == 3
        assert attempts[1].score_percent == pytest.approx(score_of(4))
        assert attempts[2].group == "Random"

    def test_non_increasing_index_rejected(self, tmp_path):
        path = tmp_path / "attempts.log"
        write_log(
            path,
            [log_record("s1", "P1", 2, 100.0, 2), log_record("s1", "P1", 2, 101.0, 3)],
        )
        with pytest.raises(StatsError, match="line 2"):
            load_attempt_log(path)

    def test_decreasing_timestamp_rejected(self, tmp_path):
        path = tmp_path / "attempts.log"
        write_log(
            path,
            [log_record("s1", "P1", 1, 100.0, 2), log_record("s1", "P1", 2, 99.0, 3)],
        )
        with pytest.raises(StatsError, match="timestamp"):
            load_attempt_log(path)

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "attempts.log"
        path.write_text(
            json.dumps(log_record("s1", "P1", 1, 100.0, 2)) + "\nnot json\n",
            encoding="utf-8",
        )
        with pytest.raises(StatsError, match="line 2"):
            load_attempt_log(path)

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "attempts.log"
        rec = log_record("s1", "P1", 1, 100.0, 2)
        del rec["score_percent"]
        write_log(path, [rec])
        with pytest.raises(StatsError, match="score_percent"):
            load_attempt_log(path)

    def test_score_rubric_mismatch_rejected(self, tmp_path):
        path = tmp_path / "attempts.log"
        rec = log_record("s1", "P1", 1, 100.0, 2)
        rec["score_percent"] = 99.0
        write_log(path, [rec])
        with pytest.raises(StatsError, match="line 1"):
            load_attempt_log(path)


class TestScoreRows:
    def test_join_with_group(self):
        attempts = [
            make_attempt("s1", "P1", 0.0, 2, group="Random"),
            make_attempt("s1", "P1", 1.0, 5, group="Random"),
            make_attempt("s2", "P1", 0.0, 3, group="SelfEval"),
        ]
        rows = score_rows(attempts)
        assert len(rows) == 2
        by_student = {r.student_id: r for r in rows}
        assert by_student["s1"].group == "Random"
        assert by_student["s1"].best == pytest.approx(score_of(5))
        assert by_student["s2"].initial == pytest.approx(score_of(3))

    def test_conflicting_group_rejected(self):
        attempts = [
            make_attempt("s1", "P1", 0.0, 2, group="Random"),
            make_attempt("s1", "P2", 1.0, 2, group="First"),
        ]
        with pytest.raises(StatsError, match="groups"):
            score_rows(attempts)


class TestBestScoreComparisons:
    @staticmethod
    def attempts_with_treatment_effect():
        rng = np.random.default_rng(7)
        attempts = []
        for i in range(36):
            group = GROUPS[i % 3]
            sid = f"s{i}"
            for pid in ("P1", "P2"):
                base_k = int(rng.integers(1, 4))
                boost = 3 if group in ("Random", "First") else 0
                attempts.append(make_attempt(sid, pid, 0.0, base_k, group=group))
                attempts.append(
                    make_attempt(sid, pid, 1.0, min(base_k + boost, 7), group=group)
                )
        return attempts

    def test_rows_sorted_and_effect_detected(self):
        out = best_score_comparisons(self.attempts_with_treatment_effect())
        assert [c.problem_id for c in out] == ["P1", "P2"]
        for c in out:
            assert c.group_sizes == (12, 12, 12)
            selfeval_mean = c.group_means[GROUPS.index("SelfEval")]
            assert c.group_means[GROUPS.index("Random")] > selfeval_mean
            assert c.h > 0
            assert 0.0 <= c.p <= 1.0

    def test_missing_group_yields_nan_mean(self):
        attempts = [
            make_attempt(f"s{i}", "P1", 0.0, 1 + i % 3, group="First") for i in range(5)
        ] + [
            make_attempt(f"t{i}", "P1", 0.0, 3 + i % 3, group="Random") for i in range(5)
        ]
        out = best_score_comparisons(attempts)
        assert math.isnan(out[0].group_means[GROUPS.index("SelfEval")])
        assert out[0].group_sizes[GROUPS.index("SelfEval")] == 0

    def test_single_populated_group_rejected(self):
        attempts = [make_attempt(f"s{i}", "P1", 0.0, 2, group="First") for i in range(4)]
        with pytest.raises(StatsError, match="non-empty"):
            best_score_comparisons(attempts)


def survey_fixture():
    rng = np.random.default_rng(19)
    responses = []
    for i in range(30):
        for group in ("First", "Random"):
            sid = f"{group}-{i}"
            responses.append(
                LikertResponse("S01", int(rng.integers(0, 3)), student_id=sid, group=group)
            )
            responses.append(
                LikertResponse("S08", int(rng.integers(-1, 2)), student_id=sid, group=group)
            )
    for i in range(20):
        for group in GROUPS:
            responses.append(
                LikertResponse(
                    "S04",
                    int(rng.integers(-2, 3)),
                    reverse_coded=True,
                    student_id=f"a{group}{i}",
                    group=group,
                )
            )
    return responses


class TestSurveyDrivers:
    def test_pair_comparisons_welch(self):
        rows = survey_pair_comparisons(survey_fixture(), pairs=(("S01", "S08"),))
        assert len(rows) == 2
        for row in rows:
            assert row.method == "welch"
            assert row.group in ("First", "Random")
            assert 0.0 <= row.p <= 1.0
            direct = welch_t(
                [r.value for r in survey_fixture() if r.group == row.group and r.question_id == "S01"],
                [r.value for r in survey_fixture() if r.group == row.group and r.question_id == "S08"],
            )
            assert row.t == pytest.approx(direct.t, abs=1e-12)

    def test_pair_comparisons_paired_uses_common_students(self):
        rows = survey_pair_comparisons(
            survey_fixture(), pairs=(("S01", "S08"),), method="paired"
        )
        assert all(r.method == "paired" for r in rows)

    def test_unknown_method_rejected(self):
        with pytest.raises(StatsError, match="method"):
            survey_pair_comparisons(survey_fixture(), method="bootstrap")

    def test_anova_rows(self):
        rows = survey_anova(survey_fixture(), question_ids=("S04",))
        assert len(rows) == 1
        row = rows[0]
        assert row.question_id == "S04"
        assert len(row.group_means) == 3
        # Means are of coded (negated) values for the reverse-coded item.
        raw = survey_fixture()
        selfeval_vals = [-r.value for r in raw if r.group == "SelfEval" and r.question_id == "S04"]
        assert row.group_means[GROUPS.index("SelfEval")] == pytest.approx(
            float(np.mean(selfeval_vals))
        )
        direct = anova_oneway(
            [
                [-r.value for r in raw if r.group == g and r.question_id == "S04"]
                for g in GROUPS
            ]
        )
        assert row.f == pytest.approx(direct.f, abs=1e-12)


class TestCsvWriters:
    def test_best_scores_csv(self, tmp_path):
        comparison = BestScoreComparison(
            problem_id="P1",
            group_means=(75.8, 90.1, 92.1),
            group_sds=(38.8, 24.1, 22.9),
            group_sizes=(40, 41, 39),
            h=10.95,
            p=0.004,
            all_identical=False,
        )
        path = tmp_path / "best.csv"
        write_best_scores_csv(path, [comparison])
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [
            "problem_id",
            "selfeval_mean",
            "selfeval_sd",
            "random_mean",
            "random_sd",
            "first_mean",
            "first_sd",
            "H",
            "p",
        ]
        assert float(rows[1][1]) == 75.8
        assert float(rows[1][7]) == 10.95

    def test_ols_csv_has_r_squared_row(self, tmp_path):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(30, 2))
        y = x @ np.array([1.0, 2.0]) + rng.normal(size=30)
        res = ols_fit(x, y, ["a", "b"])
        path = tmp_path / "ols.csv"
        write_ols_csv(path, res)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["coefficient", "estimate", "std_err", "t", "p"]
        assert rows[-1][0] == "R2"
        assert float(rows[-1][1]) == res.r_squared
        assert float(rows[1][1]) == res.coef[0]

    def test_survey_csvs(self, tmp_path):
        pair_rows = survey_pair_comparisons(survey_fixture(), pairs=(("S01", "S08"),))
        anova_rows = survey_anova(survey_fixture(), question_ids=("S04",))
        p1 = tmp_path / "pairs.csv"
        p2 = tmp_path / "anova.csv"
        write_survey_pairs_csv(p1, pair_rows)
        write_survey_anova_csv(p2, anova_rows)
        with open(p1, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][-1] == "method"
        assert rows[1][-1] == "welch"
        with open(p2, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["question_id", "selfeval_mean", "random_mean", "first_mean", "F", "p"]
        assert float(rows[1][4]) == anova_rows[0].f
