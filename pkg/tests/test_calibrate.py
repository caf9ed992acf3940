import math

import numpy as np
import pytest
from scipy import stats

from uqtriage.calibrate import calibrate_tau_au, calibrate_tau_eu, sample_calibration_set
from uqtriage.errors import ValidationError

from conftest import random_feature_set


def tau_au_sweep_oracle(entropies, accurate, eu, tau_eu, n_classes):
    """Exhaustive sweep over every candidate threshold."""
    low = eu < tau_eu
    candidates = sorted(set(entropies[low]) | {math.log(n_classes)})
    best_tau, best_obj = None, -1
    for tau in candidates:
        obj = int(np.sum(accurate & low & (entropies < tau)))
        if obj > best_obj:  # strictly greater: ties keep the smallest candidate
            best_tau, best_obj = tau, obj
    return best_tau, best_obj


class TestSampleCalibrationSet:
    def build(self, rng, class_sizes):
        n = sum(class_sizes)
        labels = np.repeat(np.arange(len(class_sizes)), class_sizes)
        fs = random_feature_set(rng, n=n, d=4, n_classes=max(2, len(class_sizes)))
        fs.labels = labels
        return fs

    def test_full_draw_returns_everything(self, rng):
        fs = self.build(rng, [30, 20])
        cal = sample_calibration_set(fs, target_size=50, seed=0)
        np.testing.assert_array_equal(cal.indices, np.arange(50))

    def test_two_equal_strata_split_evenly(self, rng):
        fs = self.build(rng, [200, 200])
        cal = sample_calibration_set(fs, target_size=100, seed=1)
        labels = fs.labels[cal.indices]
        assert int(np.sum(labels == 0)) == 50
        assert int(np.sum(labels == 1)) == 50

    def test_largest_remainder_allocation(self, rng):
        # 700/200/100 at target 100 -> 70/20/10 by largest-remainder arithmetic
        fs = self.build(rng, [700, 200, 100])
        cal = sample_calibration_set(fs, target_size=100, seed=2)
        labels = fs.labels[cal.indices]
        counts = [int(np.sum(labels == c)) for c in range(3)]
        assert counts == [70, 20, 10]

    def test_tiny_stratum_still_represented(self, rng):
        fs = self.build(rng, [990, 5])
        cal = sample_calibration_set(fs, target_size=20, seed=3)
        labels = fs.labels[cal.indices]
        assert int(np.sum(labels == 1)) >= 1
        assert len(cal) == 20

    def test_deterministic_given_seed(self, rng):
        fs = self.build(rng, [300, 100])
        a = sample_calibration_set(fs, target_size=60, seed=9)
        b = sample_calibration_set(fs, target_size=60, seed=9)
        np.testing.assert_array_equal(a.indices, b.indices)

    def test_target_below_strata_count_rejected(self, rng):
        fs = self.build(rng, [10, 10, 10])
        with pytest.raises(ValidationError):
            sample_calibration_set(fs, target_size=2, seed=0)

    def test_grouped_strata(self, rng):
        fs = self.build(rng, [100, 100])
        groups = np.tile([0, 1], 100)
        cal = sample_calibration_set(fs, target_size=40, seed=4, groups=groups)
        seen = set(cal.strata)
        assert len(seen) == 4  # both classes x both groups represented


class TestCalibrateTauEu:
    def test_order_statistic_on_integers(self):
        scores = np.arange(1.0, 101.0)
        assert calibrate_tau_eu(scores, tpr=0.95) == 95.0

    def test_degenerate_constant_scores(self):
        assert calibrate_tau_eu(np.full(37, 2.5), tpr=0.95) == 2.5

    def test_gaussian_quantile(self):
        rng = np.random.default_rng(42)
        scores = rng.standard_normal(10_000)
        tau = calibrate_tau_eu(scores, tpr=0.95)
        assert abs(tau - stats.norm.ppf(0.95)) < 0.05  # 1.6449

    def test_below_tau_fraction_within_one_over_n(self, rng):
        scores = rng.random(1000)
        for tpr in (0.5, 0.9, 0.95, 0.99):
            tau = calibrate_tau_eu(scores, tpr=tpr)
            frac = np.mean(scores < tau)
            assert tpr - 1.0 / 1000 <= frac < tpr + 1.0 / 1000

    def test_monotone_in_tpr(self, rng):
        scores = rng.standard_normal(500)
        taus = [calibrate_tau_eu(scores, tpr) for tpr in (0.5, 0.8, 0.9, 0.95, 0.99)]
        assert all(a <= b for a, b in zip(taus, taus[1:]))

    def test_fresh_draw_tpr_within_two_points(self):
        rng = np.random.default_rng(123)
        calib = rng.standard_normal(10_000)
        fresh = rng.standard_normal(10_000)
        tau = calibrate_tau_eu(calib, tpr=0.95)
        frac = float(np.mean(fresh < tau))
        assert 0.93 <= frac <= 0.97

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            calibrate_tau_eu(np.array([]), tpr=0.95)


class TestCalibrateTauAu:
    def test_all_accurate_admits_everything(self, rng):
        h = rng.random(50)
        acc = np.ones(50, dtype=bool)
        eu = np.zeros(50)
        tau = calibrate_tau_au(h, acc, eu, tau_eu=1.0, n_classes=6)
        assert tau == pytest.approx(math.log(6))

    def test_separable_case_picks_smallest_candidate_above_accurate(self):
        h = np.array([0.02, 0.05, 0.1, 0.5, 0.8, 0.9])
        acc = np.array([True, True, True, False, False, False])
        eu = np.zeros(6)
        tau = calibrate_tau_au(h, acc, eu, tau_eu=1.0, n_classes=4)
        assert tau == 0.5  # any tau in (0.1, 0.5] maximizes; ties -> smallest

    def test_matches_exhaustive_sweep_oracle(self, rng):
        for trial in range(20):
            n = 20
            h = rng.random(n) * math.log(6)
            acc = rng.random(n) < 0.6
            eu = rng.random(n) * 2
            tau_eu = 1.2
            tau = calibrate_tau_au(h, acc, eu, tau_eu, n_classes=6)
            ref_tau, ref_obj = tau_au_sweep_oracle(h, acc, eu, tau_eu, 6)
            assert tau == ref_tau
            low = eu < tau_eu
            assert int(np.sum(acc & low & (h < tau))) == ref_obj

    def test_no_low_eu_records_rejected(self):
        with pytest.raises(ValidationError):
            calibrate_tau_au(np.array([0.1]), np.array([True]), np.array([5.0]), 1.0, 4)
