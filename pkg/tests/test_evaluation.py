"""Rating arithmetic, case weighting, significance tests, report pipeline."""

from __future__ import annotations

import dataclasses
import random
from itertools import combinations

import pytest

from uncertain_dx.decision import Diagnosis, UtilityMatrix, max_belief_diagnosis, meu_diagnosis
from uncertain_dx.engine import naive_dempster_shafer, odds_likelihood, simple_bayes
from uncertain_dx.errors import (
    MissingGoldStandard,
    MissingRatings,
    MissingTrueDiagnosis,
)
from uncertain_dx.evaluation import (
    CaseWeight,
    RatingPair,
    case_weights,
    evaluate_methods,
    expected_disutility,
    expert_rating_summary,
    permutation_test,
    weighted_mean_sd,
    wilcoxon_rank_test,
)
from uncertain_dx.kb import (
    BeliefDistribution,
    CaseRecord,
    ConditionalTable,
    Disease,
    Feature,
    KnowledgeBase,
    Observation,
)


def dist(**beliefs) -> BeliefDistribution:
    return BeliefDistribution(beliefs=beliefs, pre_norm_sum=1.0, method="external")


def uniform_weights(n: int) -> list[CaseWeight]:
    return [CaseWeight(case_id=f"c{i:02d}", weight=1.0 / n) for i in range(n)]


BENIGN_LETHAL = UtilityMatrix(
    classes=("b", "l"),
    class_disutility={("b", "b"): 0.0, ("b", "l"): 1000.0, ("l", "b"): 800000.0, ("l", "l"): 0.0},
    expansion={"benign": "b", "lethal": "l"},
)
BL_KB = KnowledgeBase(
    diseases=(
        Disease(id="benign", name="benign", prior=0.5, equivalence_class="b"),
        Disease(id="lethal", name="lethal", prior=0.5, equivalence_class="l"),
    ),
    features=(Feature(id="f", name="f", values=("a", "b")),),
    conditionals=ConditionalTable(
        {("f", "a", "benign"): 0.5, ("f", "b", "benign"): 0.5, ("f", "a", "lethal"): 0.5, ("f", "b", "lethal"): 0.5}
    ),
)


class TestExpectedDisutility:
    def test_point_mass_correct_class_is_free(self):
        p = dist(benign=1.0)
        dx = Diagnosis(disease="benign", rule="meu")
        assert expected_disutility(p, BENIGN_LETHAL, dx, BL_KB) == 0.0

    def test_missed_lethal_mass(self):
        p = dist(benign=0.9, lethal=0.1)
        dx = Diagnosis(disease="benign", rule="max_belief")
        assert expected_disutility(p, BENIGN_LETHAL, dx, BL_KB) == pytest.approx(80000.0, abs=1e-9)

    def test_within_class_spread_is_free_on_zero_diagonal(self, fixture_kb, fixture_utilities):
        zero_diag = UtilityMatrix(
            classes=fixture_utilities.classes,
            class_disutility={
                k: (0.0 if k[0] == k[1] else v) for k, v in fixture_utilities.class_disutility.items()
            },
            expansion=fixture_utilities.expansion,
        )
        p = dist(va=0.4, csd=0.35, sh=0.25)
        dx = Diagnosis(disease="csd", rule="meu")
        assert expected_disutility(p, zero_diag, dx, fixture_kb) == 0.0


class TestCaseWeights:
    def make_cases(self, *true_ids):
        return [
            CaseRecord(id=f"c{i}", observations=(), true_diagnosis=t)
            for i, t in enumerate(true_ids)
        ]

    def test_normalized_priors(self):
        kb = KnowledgeBase(
            diseases=(
                Disease(id="rare", name="", prior=0.02, equivalence_class="c"),
                Disease(id="common", name="", prior=0.08, equivalence_class="c"),
                Disease(id="rest", name="", prior=0.90, equivalence_class="c"),
            ),
            features=(Feature(id="f", name="", values=("a", "b")),),
            conditionals=ConditionalTable(
                {(f, v, d): 0.5 for f in ("f",) for v in ("a", "b") for d in ("rare", "common", "rest")}
            ),
        )
        weights = case_weights(self.make_cases("rare", "common"), kb)
        assert weights[0].weight == pytest.approx(0.2, abs=1e-12)
        assert weights[1].weight == pytest.approx(0.8, abs=1e-12)

    def test_equal_priors_give_uniform_weights(self):
        weights = case_weights(self.make_cases("benign", "lethal"), BL_KB)
        assert [w.weight for w in weights] == [0.5, 0.5]

    def test_single_case(self):
        (w,) = case_weights(self.make_cases("benign"), BL_KB)
        assert w.weight == 1.0

    def test_missing_true_diagnosis(self):
        with pytest.raises(MissingTrueDiagnosis, match="c0"):
            case_weights([CaseRecord(id="c0", observations=())], BL_KB)

    def test_weights_sum_to_one(self):
        rng = random.Random(5)
        cases = self.make_cases(*[rng.choice(["benign", "lethal"]) for _ in range(17)])
        weights = case_weights(cases, BL_KB)
        assert sum(w.weight for w in weights) == pytest.approx(1.0, abs=1e-12)


class TestWeightedMeanSd:
    def test_two_point(self):
        mean, sd = weighted_mean_sd([0.0, 10.0], uniform_weights(2))
        assert (mean, sd) == (5.0, 5.0)

    def test_constant_values(self):
        mean, sd = weighted_mean_sd([3.0, 3.0, 3.0], uniform_weights(3))
        assert (mean, sd) == (3.0, 0.0)

    def test_single_value(self):
        assert weighted_mean_sd([7.5], uniform_weights(1)) == (7.5, 0.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="weights"):
            weighted_mean_sd([1.0], uniform_weights(2))


class TestPermutationTest:
    def test_all_zero_diffs_give_asl_one(self):
        asl = permutation_test([0.0] * 6, uniform_weights(6), iterations=1000, seed=1)
        assert asl == 1.0

    def test_constant_positive_diffs_are_significant(self):
        asl = permutation_test([1.0] * 20, uniform_weights(20), iterations=10000, seed=3)
        assert asl <= 0.001

    def test_seed_determinism_is_bit_exact(self):
        rng = random.Random(11)
        diffs = [rng.gauss(0.5, 1.0) for _ in range(15)]
        weights = uniform_weights(15)
        first = permutation_test(diffs, weights, iterations=2000, seed=42)
        second = permutation_test(diffs, weights, iterations=2000, seed=42)
        assert first == second

    def test_pair_order_does_not_matter(self):
        rng = random.Random(12)
        diffs = [rng.gauss(0.3, 1.0) for _ in range(12)]
        weights = [CaseWeight(f"case{i:02d}", 1.0 / 12) for i in range(12)]
        baseline = permutation_test(diffs, weights, iterations=1500, seed=9)
        paired = list(zip(diffs, weights))
        rng.shuffle(paired)
        shuffled = permutation_test([d for d, _ in paired], [w for _, w in paired], iterations=1500, seed=9)
        assert shuffled == baseline

    def test_iteration_floor(self):
        with pytest.raises(ValueError, match="1000"):
            permutation_test([1.0], uniform_weights(1), iterations=999, seed=0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            permutation_test([], [], iterations=1000, seed=0)


def exact_rank_sum_asl(a: list[float], b: list[float]) -> float:
    """Enumeration oracle: fraction of equal-size regroupings whose rank
    sum meets or exceeds the observed one."""
    pooled = a + b
    order = sorted(range(len(pooled)), key=lambda i: pooled[i])
    ranks = [0.0] * len(pooled)
    i = 0
    while i < len(pooled):
        j = i
        while j + 1 < len(pooled) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j + 2) / 2
        i = j + 1
    observed = sum(ranks[: len(a)])
    splits = list(combinations(range(len(pooled)), len(a)))
    hits = sum(1 for split in splits if sum(ranks[i] for i in split) >= observed)
    return hits / len(splits)


class TestWilcoxonRankTest:
    def test_identical_samples(self):
        assert wilcoxon_rank_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(0.5, abs=1e-12)

    def test_all_tied_samples(self):
        assert wilcoxon_rank_test([4.0, 4.0], [4.0, 4.0]) == 0.5

    def test_clearly_separated_samples(self):
        a, b = [8.0, 9.0, 10.0, 9.0], [1.0, 0.0, 2.0, 1.0]
        asl = wilcoxon_rank_test(a, b)
        assert asl < 0.05
        # Exact enumeration over the C(8,4) regroupings agrees: only the
        # observed split reaches the observed rank sum.
        assert exact_rank_sum_asl(a, b) == pytest.approx(1 / 70, abs=1e-12)

    def test_single_element_samples(self):
        asl = wilcoxon_rank_test([1.0], [0.0])
        assert asl > 0.05
        assert exact_rank_sum_asl([1.0], [0.0]) == 0.5

    def test_direction_is_one_sided(self):
        high, low = [5.0, 6.0, 7.0], [1.0, 2.0, 3.0]
        assert wilcoxon_rank_test(high, low) < 0.5 < wilcoxon_rank_test(low, high)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            wilcoxon_rank_test([], [1.0])


class TestExpertRatingSummary:
    def rated_case(self, i, **ratings):
        return CaseRecord(id=f"c{i:02d}", observations=(), expert_ratings=ratings or None)

    def test_all_tens(self):
        cases = [self.rated_case(i, simple_bayes=10.0) for i in range(3)]
        summary = expert_rating_summary(cases, uniform_weights(3), ["simple_bayes"])
        assert summary["simple_bayes"] == (10.0, 0.0)

    def test_two_point_spread(self):
        cases = [self.rated_case(0, simple_bayes=10.0), self.rated_case(1, simple_bayes=0.0)]
        summary = expert_rating_summary(cases, uniform_weights(2), ["simple_bayes"])
        assert summary["simple_bayes"] == (5.0, 5.0)

    def test_one_row_per_method(self):
        cases = [self.rated_case(i, simple_bayes=8.0, odds_likelihood=6.0) for i in range(2)]
        summary = expert_rating_summary(cases, uniform_weights(2), ["simple_bayes", "odds_likelihood"])
        assert set(summary) == {"simple_bayes", "odds_likelihood"}
        assert all(len(v) == 2 for v in summary.values())

    def test_missing_rating_names_case_and_method(self):
        cases = [self.rated_case(0, simple_bayes=8.0), self.rated_case(1)]
        with pytest.raises(MissingRatings, match="c01.*simple_bayes"):
            expert_rating_summary(cases, uniform_weights(2), ["simple_bayes"])


class TestRatingPair:
    def test_diff_nonnegative(self):
        pair = RatingPair(r_method=5.0, r_gold=2.0)
        assert pair.diff == 3.0

    def test_method_below_gold_rejected(self):
        with pytest.raises(ValueError):
            RatingPair(r_method=1.0, r_gold=2.0)


class TestEvaluateMethods:
    def run(self, fixture_kb, fixture_cases, fixture_utilities, **kwargs):
        kwargs.setdefault("methods", ["simple_bayes_meu", "simple_bayes", "odds_likelihood", "naive_dempster_shafer"])
        kwargs.setdefault("gold_source", "informed")
        kwargs.setdefault("seed", 7)
        kwargs.setdefault("iterations", 2000)
        methods = kwargs.pop("methods")
        gold_source = kwargs.pop("gold_source")
        return evaluate_methods(fixture_kb, fixture_cases, fixture_utilities, methods, gold_source, **kwargs)

    def test_row_labels_and_order(self, fixture_kb, fixture_cases, fixture_utilities):
        report = self.run(fixture_kb, fixture_cases, fixture_utilities)
        assert [row.label for row in report.decision_rows] == [
            "Informed gold standard",
            "Simple Bayes-MEU",
            "Simple Bayes",
            "Odds-likelihood",
            "Naive Dempster-Shafer",
        ]
        assert [row.label for row in report.gold_rows] == [
            "Informed Gold Standard",
            "Descriptive Gold Standard",
        ]

    def test_hand_computed_aggregates(self, fixture_kb, fixture_cases, fixture_utilities):
        """Frozen from exact decimal arithmetic over the fixture: gold
        ratings (23940, 151100, 178100, 165500) with weights
        (1/2, 1/5, 1/6, 2/15); the Bayes-family methods differ from gold
        only on c4 (by 17500) and the combination rule also on c4
        (by 177150)."""
        report = self.run(fixture_kb, fixture_cases, fixture_utilities)
        rows = {row.label: row for row in report.decision_rows}
        assert rows["Informed gold standard"].absolute_mean == pytest.approx(93940.0, abs=1e-6)
        for label in ("Simple Bayes-MEU", "Simple Bayes", "Odds-likelihood"):
            assert rows[label].diff_mean == pytest.approx(17500 * 2 / 15, abs=1e-6)
        assert rows["Naive Dempster-Shafer"].diff_mean == pytest.approx(177150 * 2 / 15, abs=1e-6)
        assert rows["Simple Bayes-MEU"].agreement == (3, 4)
        assert rows["Naive Dempster-Shafer"].agreement == (1, 4)
        assert report.gold_rows[1].diff_mean == pytest.approx(17500 * 2 / 15, abs=1e-6)

    def test_poisoned_case_excluded_with_reason(self, fixture_kb, fixture_cases, fixture_utilities):
        report = self.run(fixture_kb, fixture_cases, fixture_utilities)
        assert report.case_count == 4
        assert [(e.case_id, e.reason) for e in report.exclusions] == [
            ("c5", "simple_bayes: AllHypothesesRuledOut")
        ]

    def test_gold_never_beaten_on_fixture(self, fixture_kb, fixture_cases, fixture_utilities):
        """Recompute the per-case identity with public operations: the gold
        diagnosis minimizes expected disutility, so every method rating is
        at least the gold rating, with equality when diagnoses coincide."""
        engines = {
            "simple_bayes": simple_bayes,
            "odds_likelihood": odds_likelihood,
            "naive_dempster_shafer": naive_dempster_shafer,
        }
        for case in fixture_cases[:4]:
            p_gold = case.gold_informed
            dx_gold = meu_diagnosis(p_gold, fixture_utilities, fixture_kb)
            r_gold = expected_disutility(p_gold, fixture_utilities, dx_gold, fixture_kb)
            for run in engines.values():
                dx = max_belief_diagnosis(run(fixture_kb, case.observations))
                r = expected_disutility(p_gold, fixture_utilities, dx, fixture_kb)
                assert r >= r_gold
                if dx.disease == dx_gold.disease:
                    assert r == r_gold

    def test_diffs_zero_when_methods_match_gold(self):
        kb = KnowledgeBase(
            diseases=(
                Disease(id="benign", name="", prior=0.5, equivalence_class="b"),
                Disease(id="lethal", name="", prior=0.5, equivalence_class="l"),
            ),
            features=(Feature(id="f", name="", values=("a", "b")),),
            conditionals=ConditionalTable(
                {("f", "a", "benign"): 0.9, ("f", "b", "benign"): 0.1, ("f", "a", "lethal"): 0.1, ("f", "b", "lethal"): 0.9}
            ),
        )
        utilities = UtilityMatrix(
            classes=("b", "l"),
            class_disutility={("b", "b"): 0.0, ("b", "l"): 100.0, ("l", "b"): 10.0, ("l", "l"): 0.0},
            expansion={"benign": "b", "lethal": "l"},
        )
        gold = {"benign": 0.9, "lethal": 0.1}
        cases = [
            CaseRecord(
                id=f"c{i}",
                observations=(Observation("f", "a"),),
                true_diagnosis="benign",
                gold_informed=BeliefDistribution.from_unnormalized(gold, method="external"),
            )
            for i in range(3)
        ]
        report = evaluate_methods(
            kb, cases, utilities, ["simple_bayes", "naive_dempster_shafer"], "informed", seed=0, iterations=1000
        )
        for row in report.decision_rows[1:]:
            assert row.diff_mean == 0.0
            assert row.agreement == (3, 3)
        assert all(r.asl == 1.0 for r in report.significance if r.test == "monte_carlo_permutation")

    def test_descriptive_gold_source(self, fixture_kb, fixture_cases, fixture_utilities):
        report = self.run(fixture_kb, fixture_cases, fixture_utilities, gold_source="descriptive")
        assert report.decision_rows[0].label == "Descriptive gold standard"
        assert [row.label for row in report.gold_rows] == [
            "Descriptive Gold Standard",
            "Informed Gold Standard",
        ]

    def test_expert_rows_cover_distribution_methods(self, fixture_kb, fixture_cases, fixture_utilities):
        report = self.run(fixture_kb, fixture_cases, fixture_utilities)
        assert [row.label for row in report.expert_rows] == [
            "Simple Bayes",
            "Odds-likelihood",
            "Naive Dempster-Shafer",
        ]
        by_label = {r.label: r for r in report.expert_rows}
        assert by_label["Simple Bayes"].mean == pytest.approx(8.2333333, abs=1e-6)
        assert by_label["Odds-likelihood"].mean == pytest.approx(7.3333333, abs=1e-6)
        assert by_label["Naive Dempster-Shafer"].mean == pytest.approx(0.6333333, abs=1e-6)

    def test_expert_section_omitted_without_ratings(self, fixture_kb, fixture_cases, fixture_utilities):
        stripped = [dataclasses.replace(c, expert_ratings=None) for c in fixture_cases]
        report = self.run(fixture_kb, stripped, fixture_utilities)
        assert report.expert_rows == ()
        assert all(r.test != "wilcoxon_rank_sum" for r in report.significance)

    def test_partial_ratings_are_an_error(self, fixture_kb, fixture_cases, fixture_utilities):
        cases = list(fixture_cases)
        cases[1] = dataclasses.replace(cases[1], expert_ratings=None)
        with pytest.raises(MissingRatings, match="c2"):
            self.run(fixture_kb, cases, fixture_utilities)

    def test_missing_gold_is_an_input_error(self, fixture_kb, fixture_cases, fixture_utilities):
        cases = list(fixture_cases)
        cases[2] = dataclasses.replace(cases[2], gold_informed=None)
        with pytest.raises(MissingGoldStandard, match="c3"):
            self.run(fixture_kb, cases, fixture_utilities)

    def test_gold_pair_requires_both_everywhere(self, fixture_kb, fixture_cases, fixture_utilities):
        cases = list(fixture_cases)
        cases[2] = dataclasses.replace(cases[2], gold_descriptive=None)
        report = self.run(fixture_kb, cases, fixture_utilities)
        assert report.gold_rows == ()

    def test_method_validation(self, fixture_kb, fixture_cases, fixture_utilities):
        with pytest.raises(ValueError, match="unknown method"):
            self.run(fixture_kb, fixture_cases, fixture_utilities, methods=["guesswork"])
        with pytest.raises(ValueError, match="no methods"):
            self.run(fixture_kb, fixture_cases, fixture_utilities, methods=[])
        with pytest.raises(ValueError, match="duplicate"):
            self.run(fixture_kb, fixture_cases, fixture_utilities, methods=["simple_bayes", "simple_bayes"])
        with pytest.raises(ValueError, match="gold source"):
            self.run(fixture_kb, fixture_cases, fixture_utilities, gold_source="peer_review")

    def test_report_is_seed_deterministic(self, fixture_kb, fixture_cases, fixture_utilities):
        a = self.run(fixture_kb, fixture_cases, fixture_utilities)
        b = self.run(fixture_kb, fixture_cases, fixture_utilities)
        assert a.to_tsv() == b.to_tsv()
        assert a.to_json() == b.to_json()

    def test_subset_of_methods(self, fixture_kb, fixture_cases, fixture_utilities):
        report = self.run(fixture_kb, fixture_cases, fixture_utilities, methods=["simple_bayes"])
        assert [row.label for row in report.decision_rows] == [
            "Informed gold standard",
            "Simple Bayes",
        ]
        assert all(r.test != "monte_carlo_permutation" for r in report.significance)
