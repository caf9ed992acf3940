import numpy as np
import pytest

from uqtriage.adaptive import (
    CostModel,
    QueryPlan,
    baseline_max_au,
    baseline_random,
    fuse_predictions,
    fused_certainty_tags,
    select_queries,
)
from uqtriage.errors import ValidationError

COST = CostModel(t_li=1.0, t_hi=250.0)


def sort_prefix_oracle(tags, scores, cost, budget):
    """Independent selection: sort UAR by score, grow the prefix while affordable."""
    cand = sorted((scores[i], i) for i in range(len(tags)) if tags[i] == "UAR")
    chosen = []
    for s, i in cand:
        trial = cost.t_li + (len(chosen) + 1) * cost.t_hi / len(tags)
        if budget is not None and trial > budget:
            break
        chosen.append(i)
    return chosen


class TestCostModel:
    def test_paper_cost_point_is_exact(self):
        # 19.6% queried at t_li=1, t_hi=250 realizes exactly 50.0
        assert COST.realized(196, 1000) == 50.0

    def test_invariants(self):
        with pytest.raises(ValidationError):
            CostModel(t_li=0.0, t_hi=1.0)
        with pytest.raises(ValidationError):
            CostModel(t_li=2.0, t_hi=1.0)


class TestSelectQueries:
    def test_unconstrained_selects_all_uar(self):
        tags = np.array(["UAR", "C", "UAR", "UAI", "UE", "UAR"])
        scores = np.array([3.0, np.nan, 1.0, np.nan, np.nan, 2.0])
        plan = select_queries(tags, scores, COST, budget=None)
        np.testing.assert_array_equal(plan.selected, [2, 5, 0])
        np.testing.assert_array_equal(plan.ranking_scores, [1.0, 2.0, 3.0])

    def test_budget_of_li_cost_yields_empty_plan_with_warning(self):
        tags = np.array(["UAR", "UAR"])
        scores = np.array([1.0, 2.0])
        plan = select_queries(tags, scores, COST, budget=1.0)
        assert len(plan) == 0
        assert plan.realized_cost == 1.0
        assert plan.status.startswith("warning")

    def test_negative_budget_rejected(self):
        with pytest.raises(ValidationError):
            select_queries(np.array(["UAR"]), np.array([1.0]), COST, budget=-1.0)

    def test_five_sample_prefix(self):
        tags = np.array(["UAR"] * 5)
        scores = np.array([3.0, 1.0, 4.0, 1.5, 9.0])
        # budget admitting exactly two queries of five: 1 + 2/5*250 = 101
        plan = select_queries(tags, scores, COST, budget=101.0)
        np.testing.assert_array_equal(plan.selected, [1, 3])  # scores 1 and 1.5
        assert plan.realized_cost == 101.0

    def test_matches_sort_prefix_oracle(self, rng):
        for trial in range(25):
            n = 60
            tags = rng.choice(["C", "UAR", "UAI", "UE"], size=n, p=[0.4, 0.3, 0.2, 0.1])
            scores = np.where(tags == "UAR", rng.random(n), np.nan)
            budget = float(rng.random() * 100 + 1)
            plan = select_queries(tags, scores, COST, budget=budget)
            assert plan.selected.tolist() == sort_prefix_oracle(tags, scores, COST, budget)
            assert plan.realized_cost <= budget

    def test_missing_rank_for_uar_rejected(self):
        with pytest.raises(ValidationError):
            select_queries(np.array(["UAR"]), np.array([np.nan]), COST)

    def test_prefix_monotone_in_budget(self, rng):
        n = 50
        tags = np.full(n, "UAR")
        scores = rng.random(n)
        previous = []
        for budget in np.linspace(1.0, 260.0, 12):
            plan = select_queries(tags, scores, COST, budget=float(budget))
            assert plan.selected[: len(previous)].tolist() == previous
            previous = plan.selected.tolist()


class TestFusion:
    def test_empty_plan_returns_li(self, rng):
        li = rng.random((10, 3))
        hi = rng.random((10, 3))
        plan = QueryPlan(np.array([]), np.array([]), 1.0, n_total=10)
        fused, prov = fuse_predictions(li, hi, plan)
        np.testing.assert_array_equal(fused, li)
        assert set(prov) == {"LI"}

    def test_full_plan_returns_hi(self, rng):
        li = rng.random((10, 3))
        hi = rng.random((10, 3))
        plan = QueryPlan(np.arange(10), np.arange(10.0), 251.0, n_total=10)
        fused, prov = fuse_predictions(li, hi, plan)
        np.testing.assert_array_equal(fused, hi)
        assert set(prov) == {"HI"}

    def test_half_covered_matches_indicator_oracle(self, rng):
        li = rng.random((10, 3))
        hi = rng.random((10, 3))
        selected = np.array([1, 3, 5, 7, 9])
        plan = QueryPlan(selected, np.arange(5.0), 126.0, n_total=10)
        fused, prov = fuse_predictions(li, hi, plan)
        chosen = set(selected.tolist())
        for i in range(10):
            ref = hi[i] if i in chosen else li[i]
            np.testing.assert_array_equal(fused[i], ref)
            assert prov[i] == ("HI" if i in chosen else "LI")

    def test_missing_hi_rows_rejected(self, rng):
        li = rng.random((4, 2))
        hi = rng.random((4, 2))
        hi[2] = np.nan
        plan = QueryPlan(np.array([2]), np.array([0.0]), 63.5, n_total=4)
        with pytest.raises(ValidationError):
            fuse_predictions(li, hi, plan)

    def test_provenance_tags(self):
        dyn = np.array(["C", "UAR", "UAR", "UE"])
        hi_static = np.array(["C", "C", "UA", "C"])
        plan = QueryPlan(np.array([1, 2]), np.array([0.1, 0.2]), 126.0, n_total=4)
        tags = fused_certainty_tags(dyn, plan, hi_static)
        np.testing.assert_array_equal(tags, ["C", "C", "UA", "UE"])


class TestBaselines:
    def test_saturation_selects_full_pool(self, rng):
        n = 20
        plan = baseline_random(n, COST, budget=None, seed=0)
        assert len(plan) == n
        h = rng.random(n)
        ua = np.ones(n, dtype=bool)
        plan = baseline_max_au(h, ua, COST, budget=None)
        assert len(plan) == n

    def test_max_au_picks_argmax(self):
        h = np.array([0.3, 1.7, 0.9])
        ua = np.ones(3, dtype=bool)
        # budget for exactly one query out of three: 1 + 250/3
        plan = baseline_max_au(h, ua, COST, budget=1.0 + 250.0 / 3 + 1e-9)
        np.testing.assert_array_equal(plan.selected, [1])

    def test_max_au_restricted_to_ua(self, rng):
        h = rng.random(30)
        ua = rng.random(30) < 0.5
        plan = baseline_max_au(h, ua, COST, budget=None)
        assert set(plan.selected.tolist()) == set(np.flatnonzero(ua).tolist())
        # descending entropy order
        chosen_h = h[plan.selected]
        assert all(a >= b for a, b in zip(chosen_h, chosen_h[1:]))

    def test_random_deterministic_given_seed(self):
        a = baseline_random(100, COST, budget=50.0, seed=7)
        b = baseline_random(100, COST, budget=50.0, seed=7)
        np.testing.assert_array_equal(a.selected, b.selected)

    def test_random_ua_pool(self, rng):
        ua = rng.random(50) < 0.4
        plan = baseline_random(50, COST, budget=None, seed=1, pool="ua", ua_mask=ua)
        assert set(plan.selected.tolist()) == set(np.flatnonzero(ua).tolist())

    def test_random_respects_budget(self):
        plan = baseline_random(1000, COST, budget=50.0, seed=3)
        assert plan.realized_cost <= 50.0
        assert len(plan) == 196  # floor((50-1)/250 * 1000)
