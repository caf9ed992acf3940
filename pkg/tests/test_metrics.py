import math

import numpy as np
import pytest

from uqtriage.errors import ValidationError
from uqtriage.metrics import (
    EvalReport,
    aucc,
    budget_auc,
    ece,
    kendall_tau,
    macro_f1,
    p_accurate_certain,
)


def kendall_tau_b_oracle(x, y):
    """O(n^2) pair counting with the standard tie correction."""
    n = len(x)
    nc = nd = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = np.sign(x[i] - x[j])
            dy = np.sign(y[i] - y[j])
            if dx == 0:
                tx += 1
            if dy == 0:
                ty += 1
            if dx * dy > 0:
                nc += 1
            elif dx * dy < 0:
                nd += 1
    n0 = n * (n - 1) // 2
    return (nc - nd) / math.sqrt((n0 - tx) * (n0 - ty))


class TestMacroF1:
    def test_perfect_predictions(self):
        y = np.array([0, 1, 2, 0, 1, 2])
        score, per_class = macro_f1(y, y, 3)
        assert score == 1.0
        np.testing.assert_array_equal(per_class, [1.0, 1.0, 1.0])

    def test_collapsed_predictions_hand_case(self):
        # all predictions class 0 against balanced 2-class truth:
        # class 0: P=0.5, R=1 -> F1=2/3; class 1: F1=0; macro=1/3
        pred = np.zeros(10, dtype=int)
        true = np.array([0] * 5 + [1] * 5)
        score, per_class = macro_f1(pred, true, 2)
        assert per_class[0] == pytest.approx(2.0 / 3.0)
        assert per_class[1] == 0.0
        assert score == pytest.approx(1.0 / 3.0)

    def test_disjoint_support_is_zero(self):
        score, _ = macro_f1(np.zeros(4, dtype=int), np.ones(4, dtype=int), 2)
        assert score == 0.0

    def test_absent_class_excluded(self):
        # class 2 never appears on either side -> NaN slot, not averaged
        pred = np.array([0, 1, 0, 1])
        true = np.array([0, 1, 1, 1])
        score, per_class = macro_f1(pred, true, 3)
        assert np.isnan(per_class[2])
        assert score == pytest.approx(np.nanmean(per_class[:2]))


class TestEce:
    def test_confident_and_correct_is_zero(self):
        probs = np.tile([1.0, 0.0], (8, 1))
        assert ece(probs, np.zeros(8, dtype=int)) == 0.0

    def test_confident_and_wrong_is_one(self):
        probs = np.tile([1.0, 0.0], (8, 1))
        assert ece(probs, np.ones(8, dtype=int)) == 1.0

    def test_two_bin_hand_case(self):
        # bin (0, .5]: confs .4, .35, acc .5 -> gap |.5 - .375| = .125, weight .5
        # bin (.5, 1]: confs .9, .6, acc .5 -> gap |.5 - .75| = .25, weight .5
        probs = np.array(
            [
                [0.40, 0.30, 0.30],
                [0.35, 0.33, 0.32],
                [0.90, 0.05, 0.05],
                [0.60, 0.20, 0.20],
            ]
        )
        true = np.array([0, 1, 0, 1])
        assert ece(probs, true, n_bins=2) == pytest.approx(0.5 * 0.125 + 0.5 * 0.25)

    def test_right_closed_edges(self):
        # confidence exactly 0.5 must land in the lower of two bins
        probs = np.array([[0.5, 0.5], [0.9, 0.1]])
        true = np.array([0, 0])
        # lower bin: conf .5 acc 1 -> gap .5 * 1/2; upper: conf .9 acc 1 -> .1 * 1/2
        assert ece(probs, true, n_bins=2) == pytest.approx(0.5 * 0.5 + 0.5 * 0.1)

    def test_permutation_invariant(self, rng):
        probs = rng.random((30, 4))
        probs /= probs.sum(axis=1, keepdims=True)
        true = rng.integers(0, 4, 30)
        base = ece(probs, true)
        perm = rng.permutation(30)
        assert ece(probs[perm], true[perm]) == pytest.approx(base, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            ece(np.zeros((0, 2)), np.zeros(0, dtype=int))


class TestPAccurateCertain:
    def test_all_certain_correct(self):
        pred = np.array([0, 1, 2])
        tags = np.array(["C", "C", "C"])
        assert p_accurate_certain(pred, pred, tags) == 1.0

    def test_half_correct(self):
        pred = np.array([0, 0, 1, 1])
        true = np.array([0, 1, 0, 1])
        tags = np.array(["C", "C", "C", "C"])
        assert p_accurate_certain(pred, true, tags) == 0.5

    def test_mixed_case_matches_enumeration(self, rng):
        n = 10
        pred = rng.integers(0, 3, n)
        true = rng.integers(0, 3, n)
        tags = rng.choice(["C", "UAR", "UAI", "UE"], n)
        ref = sum(1 for i in range(n) if pred[i] == true[i] and tags[i] == "C") / n
        assert p_accurate_certain(pred, true, tags) == pytest.approx(ref)


class TestKendallTau:
    def test_identical_rankings(self):
        x = np.array([3.0, 1.0, 2.0, 5.0, 4.0])
        assert kendall_tau(x, x) == pytest.approx(1.0)

    def test_reversed_rankings(self):
        x = np.array([3.0, 1.0, 2.0, 5.0, 4.0])
        assert kendall_tau(x, -x) == pytest.approx(-1.0)

    def test_ties_match_pair_counting_oracle(self):
        x = np.array([1.0, 2.0, 2.0, 3.0, 1.0, 4.0])
        y = np.array([2.0, 2.0, 3.0, 1.0, 1.0, 4.0])
        assert kendall_tau(x, y) == pytest.approx(kendall_tau_b_oracle(x, y), abs=1e-12)

    def test_random_with_ties_matches_oracle(self, rng):
        for _ in range(10):
            x = rng.integers(0, 5, 20).astype(float)
            y = rng.integers(0, 5, 20).astype(float)
            if np.all(x == x[0]) or np.all(y == y[0]):
                continue
            assert kendall_tau(x, y) == pytest.approx(kendall_tau_b_oracle(x, y), abs=1e-12)

    def test_all_tied_rejected(self):
        with pytest.raises(ValidationError):
            kendall_tau(np.ones(5), np.arange(5.0))


class TestAucc:
    def test_perfectly_calibrated_is_zero(self, rng):
        probs = np.tile([1.0, 0.0], (40, 1))
        true = np.zeros(40, dtype=int)
        area, points = aucc(probs, true, rng.random(40))
        assert area == 0.0
        assert all(e == 0.0 for _, e in points)

    def test_constant_eu_gives_full_set_ece(self, rng):
        probs = rng.random((40, 3))
        probs /= probs.sum(axis=1, keepdims=True)
        true = rng.integers(0, 3, 40)
        full = ece(probs, true)
        area, points = aucc(probs, true, np.full(40, 2.0))
        assert area == pytest.approx(full, abs=1e-12)
        assert all(e == pytest.approx(full, abs=1e-12) for _, e in points)

    def test_two_point_trapezoid_oracle(self, rng):
        n = 20
        probs = rng.random((n, 3))
        probs /= probs.sum(axis=1, keepdims=True)
        true = rng.integers(0, 3, n)
        eu = rng.permutation(n).astype(float)  # distinct scores
        area, points = aucc(probs, true, eu, coverage_grid=(0.5, 1.0))
        keep = np.argsort(eu)[:10]
        e_half = ece(probs[keep], true[keep])
        e_full = ece(probs, true)
        # manual two-point trapezoid over [0.5, 1.0], normalized by the span
        ref = 0.5 * (e_half + e_full) * 0.5 / 0.5
        assert area == pytest.approx(ref, abs=1e-12)
        assert points[0] == (0.5, pytest.approx(e_half))

    def test_informative_eu_beats_random_eu(self, rng):
        # overconfident model (conf 0.9, accuracy 0.6): abstaining on the true
        # errors first shrinks the confidence-accuracy gap at every coverage
        n = 400
        probs = np.tile([0.9, 0.1], (n, 1))
        true = np.where(rng.random(n) < 0.6, 0, 1)
        errors = (probs.argmax(axis=1) != true).astype(float)
        informative, _ = aucc(probs, true, errors + 1e-3 * rng.random(n))
        random_scores, _ = aucc(probs, true, rng.random(n))
        assert informative <= random_scores


class TestBudgetAuc:
    def test_constant_curve_normalization(self):
        assert budget_auc([(1.0, 0.7), (2.0, 0.7), (5.0, 0.7)]) == pytest.approx(0.7)

    def test_linear_ramp(self):
        curve = [(0.0, 0.2), (10.0, 0.8)]
        assert budget_auc(curve) == pytest.approx(0.5)

    def test_five_point_hand_curve(self):
        xs = [1.0, 2.0, 4.0, 7.0, 11.0]
        ys = [0.1, 0.4, 0.3, 0.6, 0.2]
        ref = sum(
            0.5 * (ys[i] + ys[i + 1]) * (xs[i + 1] - xs[i]) for i in range(4)
        ) / (xs[-1] - xs[0])
        assert budget_auc(list(zip(xs, ys))) == pytest.approx(ref, abs=1e-12)

    def test_linearity_in_metric(self, rng):
        xs = np.sort(rng.random(6)) + np.arange(6)  # strictly increasing
        y1 = rng.random(6)
        y2 = rng.random(6)
        a = budget_auc(list(zip(xs, y1)))
        b = budget_auc(list(zip(xs, y2)))
        combo = budget_auc(list(zip(xs, 2.0 * y1 + 3.0 * y2)))
        assert combo == pytest.approx(2 * a + 3 * b, abs=1e-12)

    def test_too_few_points_rejected(self):
        with pytest.raises(ValidationError):
            budget_auc([(1.0, 0.5)])

    def test_non_increasing_budgets_rejected(self):
        with pytest.raises(ValidationError):
            budget_auc([(2.0, 0.5), (2.0, 0.6)])


class TestEvalReport:
    def test_report_keys(self):
        report = EvalReport(
            macro_f1=0.5, ece=0.1, p_accurate_certain=0.4, kendall_tau=-0.02, aucc=0.05
        )
        d = report.to_dict()
        for key in ("f1", "ece", "pac", "tau", "aucc"):
            assert key in d
        assert d["tau_pct"] == pytest.approx(-2.0)
