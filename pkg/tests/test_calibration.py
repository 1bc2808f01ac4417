import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probitfuse import (
    AnnotatorProfile,
    CalibrationError,
    DegenerateTableError,
    DomainError,
    build_correlation_structure,
    diagnostic_metrics,
    estimate_confusion,
    fused_confusion,
    nearest_correlation,
    std_normal_quantile,
    tetrachoric,
)

from conftest import make_validation


def quadrant_upper(rho):
    # P(Z1>0, Z2>0) closed form, used to invert the 1/3 example by hand
    return 0.25 + math.asin(rho) / (2 * math.pi)


class TestEstimateConfusion:
    def test_hand_counted_rates(self):
        # 5 experts, 4 labeled positive; 10 non-experts, 9 labeled negative
        gold = [1] * 5 + [0] * 10
        column = [1, 1, 1, 1, 0] + [0] * 9 + [1]
        validation = make_validation(gold, [[c] for c in column], panel=["kw"])
        profile = estimate_confusion(validation, "kw")
        assert profile.sensitivity == pytest.approx(0.8)
        assert profile.specificity == pytest.approx(0.9)
        assert profile.tau_pos == pytest.approx(std_normal_quantile(0.2))
        assert profile.tau_neg == pytest.approx(std_normal_quantile(0.9))

    def test_perfect_annotator_is_clamped(self):
        gold = [1] * 4 + [0] * 6
        validation = make_validation(gold, [[g] for g in gold], panel=["kw"])
        profile = estimate_confusion(validation, "kw")
        assert profile.sensitivity == pytest.approx(1 - 0.5 / 4)
        assert profile.specificity == pytest.approx(1 - 0.5 / 6)
        assert math.isfinite(profile.tau_pos) and math.isfinite(profile.tau_neg)

    def test_half_sensitivity_gives_zero_threshold(self):
        gold = [1, 1, 0, 0]
        validation = make_validation(gold, [[1], [0], [0], [0]], panel=["kw"])
        profile = estimate_confusion(validation, "kw")
        assert profile.sensitivity == pytest.approx(0.5)
        assert profile.tau_pos == 0.0

    def test_unknown_annotator(self):
        validation = make_validation([1, 0], [[1], [0]], panel=["kw"])
        with pytest.raises(CalibrationError, match="nope"):
            estimate_confusion(validation, "nope")

    def test_all_missing_in_one_class(self):
        validation = make_validation([1, 1, 0], [[None], [None], [0]], panel=["kw"])
        with pytest.raises(CalibrationError, match="kw"):
            estimate_confusion(validation, "kw")

    @given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 30), st.integers(0, 30))
    @settings(max_examples=40)
    def test_rates_never_hit_bounds(self, n_pos, n_neg, tp, tn):
        tp, tn = min(tp, n_pos), min(tn, n_neg)
        gold = [1] * n_pos + [0] * n_neg
        column = [1] * tp + [0] * (n_pos - tp) + [0] * tn + [1] * (n_neg - tn)
        validation = make_validation(gold, [[c] for c in column], panel=["kw"])
        profile = estimate_confusion(validation, "kw")
        assert 0.0 < profile.sensitivity < 1.0
        assert 0.0 < profile.specificity < 1.0
        assert math.isfinite(profile.tau_pos) and math.isfinite(profile.tau_neg)


class TestDiagnosticMetrics:
    def test_published_panel_numbers(self):
        profile = AnnotatorProfile.from_rates("fused", 121 / 153, 400 / 432)
        report = diagnostic_metrics(profile, 153, 432)
        assert report.sensitivity == pytest.approx(0.791, abs=0.005)
        assert report.specificity == pytest.approx(0.926, abs=0.005)
        assert report.accuracy == pytest.approx(0.891, abs=0.005)
        assert 10.4 <= report.lr_pos <= 11.0
        assert report.lr_neg == pytest.approx(0.23, abs=0.01)

    def test_perfect(self):
        profile = AnnotatorProfile.from_rates("p", 0.999999, 0.999999)
        report = diagnostic_metrics(
            AnnotatorProfile("p", 1.0, 1.0, profile.tau_pos, profile.tau_neg), 3, 7)
        assert report.accuracy == 1.0
        assert report.lr_pos == math.inf
        assert report.lr_neg == 0.0

    def test_uninformative(self):
        profile = AnnotatorProfile.from_rates("u", 0.5, 0.5)
        report = diagnostic_metrics(profile, 10, 10)
        assert report.lr_pos == pytest.approx(1.0)
        assert report.lr_neg == pytest.approx(1.0)

    def test_equal_class_counts_average(self):
        profile = AnnotatorProfile.from_rates("e", 0.7, 0.9)
        report = diagnostic_metrics(profile, 25, 25)
        assert report.accuracy == pytest.approx((0.7 + 0.9) / 2)

    def test_rejects_empty_class(self):
        profile = AnnotatorProfile.from_rates("e", 0.7, 0.9)
        with pytest.raises(DomainError):
            diagnostic_metrics(profile, 0, 10)


class TestTetrachoric:
    def test_independent_margins(self):
        assert tetrachoric([[25, 25], [25, 25]]) == pytest.approx(0.0, abs=1e-6)

    def test_concordant_clamps(self):
        assert tetrachoric([[50, 0], [0, 50]]) == 0.999

    def test_discordant_clamps(self):
        assert tetrachoric([[0, 50], [50, 0]]) == -0.999

    def test_half_margins_with_third_joint(self):
        # both-positive probability 1/3 with 0.5 margins inverts to rho=0.5
        table = [[100, 50], [50, 100]]
        assert quadrant_upper(0.5) == pytest.approx(1 / 3)
        assert tetrachoric(table) == pytest.approx(0.5, abs=1e-6)

    @given(st.tuples(st.integers(1, 200), st.integers(1, 200),
                     st.integers(1, 200), st.integers(1, 200)))
    @settings(max_examples=30, deadline=None)
    def test_flip_antisymmetry(self, cells):
        a, b, c, d = cells
        rho = tetrachoric([[a, b], [c, d]])
        flipped = tetrachoric([[b, a], [d, c]])
        assert flipped == pytest.approx(-rho, abs=1e-6)

    @given(st.tuples(st.integers(1, 100), st.integers(1, 100),
                     st.integers(1, 100), st.integers(1, 100)),
           st.integers(2, 7))
    @settings(max_examples=30, deadline=None)
    def test_scale_invariance(self, cells, factor):
        a, b, c, d = cells
        rho = tetrachoric([[a, b], [c, d]])
        scaled = tetrachoric([[a * factor, b * factor], [c * factor, d * factor]])
        assert scaled == pytest.approx(rho, abs=1e-6)

    def test_empty_table_degenerate(self):
        with pytest.raises(DegenerateTableError):
            tetrachoric([[0, 0], [0, 0]])

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            tetrachoric([[1, -1], [1, 1]])


class TestBuildCorrelationStructure:
    def test_always_agreeing_pair(self):
        rng = np.random.default_rng(0)
        gold = rng.integers(0, 2, 80)
        column = rng.integers(0, 2, 80)
        validation = make_validation(gold, np.column_stack([column, column]),
                                     panel=["x", "y"])
        structure = build_correlation_structure(validation, ["x", "y"], min_class_count=5)
        assert structure.r_pos.entries[0, 1] == pytest.approx(0.999, abs=1e-9)
        assert structure.r_neg.entries[0, 1] == pytest.approx(0.999, abs=1e-9)

    def test_independent_annotators_near_zero(self):
        rng = np.random.default_rng(7)
        n = 1000
        gold = (rng.random(n) < 0.4).astype(int)
        cols = np.column_stack([
            (rng.random(n) < np.where(gold == 1, 0.7, 0.2)).astype(int)
            for _ in range(3)
        ])
        validation = make_validation(gold, cols, panel=["p", "q", "r"])
        structure = build_correlation_structure(validation, ["p", "q", "r"])
        for matrix in (structure.r_pos, structure.r_neg):
            off = matrix.entries[~np.eye(3, dtype=bool)]
            assert np.all(np.abs(off) < 0.1)

    def test_single_annotator_identity(self):
        validation = make_validation([1, 1, 0, 0], [[1], [0], [0], [1]], panel=["kw"])
        structure = build_correlation_structure(validation, ["kw"], min_class_count=1)
        np.testing.assert_allclose(structure.r_pos.entries, [[1.0]])
        np.testing.assert_allclose(structure.r_neg.entries, [[1.0]])

    def test_small_class_uses_pooled(self):
        rng = np.random.default_rng(11)
        n_pos, n_neg = 5, 200
        gold = np.array([1] * n_pos + [0] * n_neg)
        base = rng.integers(0, 2, n_pos + n_neg)
        noisy = np.where(rng.random(n_pos + n_neg) < 0.3, 1 - base, base)
        validation = make_validation(gold, np.column_stack([base, noisy]), panel=["u", "v"])
        structure = build_correlation_structure(validation, ["u", "v"], min_class_count=30)
        # the expert class (5 records) must reuse the pooled estimate
        pooled = build_correlation_structure(validation, ["u", "v"],
                                             min_class_count=n_pos + n_neg + 1)
        assert structure.r_pos.entries[0, 1] == pytest.approx(
            pooled.r_pos.entries[0, 1], abs=1e-12)

    def test_output_already_psd(self):
        rng = np.random.default_rng(3)
        n = 300
        gold = (rng.random(n) < 0.4).astype(int)
        cols = np.column_stack([
            (rng.random(n) < np.where(gold == 1, 0.8, 0.1)).astype(int)
            for _ in range(4)
        ])
        validation = make_validation(gold, cols, panel=list("abcd"))
        structure = build_correlation_structure(validation, list("abcd"))
        for matrix in (structure.r_pos, structure.r_neg):
            np.testing.assert_allclose(
                nearest_correlation(matrix).entries, matrix.entries, atol=1e-12)

    def test_unknown_panel_member(self):
        validation = make_validation([1, 0], [[1], [0]], panel=["kw"])
        with pytest.raises(CalibrationError):
            build_correlation_structure(validation, ["kw", "zz"])


class TestFusedConfusion:
    def test_gold_posteriors(self):
        validation = make_validation([1, 0, 1, 0], [[1], [0], [1], [0]], panel=["kw"])
        report = fused_confusion(validation, [1.0, 0.0, 1.0, 0.0])
        assert report.sensitivity == 1.0
        assert report.specificity == 1.0

    def test_all_zero_posteriors(self):
        validation = make_validation([1, 0, 1, 0], [[1], [0], [1], [0]], panel=["kw"])
        report = fused_confusion(validation, [0.0, 0.0, 0.0, 0.0])
        assert report.sensitivity == 0.0
        assert report.specificity == 1.0

    def test_length_mismatch(self):
        validation = make_validation([1, 0], [[1], [0]], panel=["kw"])
        with pytest.raises(DomainError):
            fused_confusion(validation, [0.5])
