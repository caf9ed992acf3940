"""Budgeted query selection and LI/HI prediction fusion.

Costs are amortized so one full LI pass costs t_li and a full HI pass t_hi;
querying a fraction rho of the samples therefore realizes

    T_A = t_li + rho * t_hi,    rho = |selected| / n_total.

The fine-grained policy queries UAR samples in ascending order of their
distance to the UAR prototype bank (closer = more confidently resolvable),
truncating one global ranking at the budget. Baselines share the same cost
accounting: `random` draws uniformly (from all samples by default), `maxau`
takes the highest-entropy statically-UA samples first. Fusion substitutes the
queried samples' HI probabilities and keeps LI everywhere else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import DOMAIN_HI, DOMAIN_LI
from .dynamic import TAG_RESOLVABLE
from .errors import ValidationError

POLICY_FINEGRAINED = "finegrained"
POLICY_RANDOM = "random"
POLICY_MAXAU = "maxau"
POLICIES = (POLICY_FINEGRAINED, POLICY_RANDOM, POLICY_MAXAU)

STATUS_OK = "ok"
STATUS_BUDGET_WARNING = "warning:budget-admits-no-queries"


@dataclass(frozen=True)
class CostModel:
    """Amortized imaging cost of a full pass in each domain."""

    t_li: float = 1.0
    t_hi: float = 250.0

    def __post_init__(self):
        if not (np.isfinite(self.t_li) and self.t_li > 0):
            raise ValidationError(f"t_li must be positive, got {self.t_li}")
        if not (np.isfinite(self.t_hi) and self.t_hi >= self.t_li):
            raise ValidationError(f"t_hi must be finite and >= t_li, got {self.t_hi}")

    def realized(self, n_selected: int, n_total: int) -> float:
        # (m * t_hi) / n keeps integer ratios exact (e.g. 196/1000 * 250 = 49)
        return self.t_li + (n_selected * self.t_hi) / n_total

    def max_affordable(self, budget: float, n_total: int) -> int:
        headroom = budget - self.t_li
        if headroom < 0:
            return 0
        m = int(math.floor(headroom * n_total / self.t_hi + 1e-9))
        while m > 0 and self.realized(m, n_total) > budget:
            m -= 1
        return m


@dataclass
class QueryPlan:
    """Ordered query set with cost accounting.

    `selected` is ordered by ascending selection key (`ranking_scores`), so a
    larger budget always extends a smaller one's prefix.
    """

    selected: np.ndarray
    ranking_scores: np.ndarray
    realized_cost: float
    n_total: int
    budget: Optional[float] = None
    policy: str = POLICY_FINEGRAINED
    status: str = STATUS_OK

    def __post_init__(self):
        self.selected = np.asarray(self.selected, dtype=np.int64)
        self.ranking_scores = np.asarray(self.ranking_scores, dtype=np.float64)
        if self.selected.shape != self.ranking_scores.shape or self.selected.ndim != 1:
            raise ValidationError("selected and ranking_scores must be matching 1-D arrays")
        if self.selected.size and np.any(np.diff(self.ranking_scores) < 0):
            raise ValidationError("ranking_scores must be ascending")
        if self.policy not in POLICIES:
            raise ValidationError(f"policy must be one of {POLICIES}, got {self.policy!r}")

    def __len__(self) -> int:
        return self.selected.size

    @property
    def rho(self) -> float:
        return len(self) / self.n_total


def _plan_from_ranking(
    indices: np.ndarray,
    keys: np.ndarray,
    n_total: int,
    cost: CostModel,
    budget: Optional[float],
    policy: str,
) -> QueryPlan:
    """Sort candidates by ascending key and keep the affordable prefix."""
    order = np.lexsort((indices, keys))
    indices = indices[order]
    keys = keys[order]
    status = STATUS_OK
    if budget is not None:
        if budget < 0 or not np.isfinite(budget):
            raise ValidationError(f"budget must be finite and non-negative, got {budget}")
        m = cost.max_affordable(budget, n_total)
        if m == 0:
            status = STATUS_BUDGET_WARNING
        indices = indices[:m]
        keys = keys[:m]
    return QueryPlan(
        selected=indices,
        ranking_scores=keys,
        realized_cost=cost.realized(indices.size, n_total),
        n_total=n_total,
        budget=budget,
        policy=policy,
        status=status,
    )


def select_queries(
    dyn_tags, ranking_scores, cost: CostModel, budget: Optional[float] = None
) -> QueryPlan:
    """Fine-grained policy: UAR samples by ascending UAR-prototype distance."""
    tags = np.asarray(dyn_tags)
    scores = np.asarray(ranking_scores, dtype=np.float64)
    if tags.shape != scores.shape or tags.ndim != 1:
        raise ValidationError("dyn_tags and ranking_scores must be matching 1-D arrays")
    cand = np.flatnonzero(tags == TAG_RESOLVABLE)
    if not np.all(np.isfinite(scores[cand])):
        raise ValidationError("every UAR sample must carry a finite ranking score")
    return _plan_from_ranking(cand, scores[cand], tags.size, cost, budget, POLICY_FINEGRAINED)


def baseline_random(
    n_total: int,
    cost: CostModel,
    budget: Optional[float],
    seed: int,
    pool: str = "all",
    ua_mask=None,
) -> QueryPlan:
    """Uniform queries without replacement; pool is all samples or the UA subset."""
    if pool not in ("all", "ua"):
        raise ValidationError(f"pool must be 'all' or 'ua', got {pool!r}")
    if pool == "ua":
        if ua_mask is None:
            raise ValidationError("pool='ua' requires ua_mask")
        eligible = np.flatnonzero(np.asarray(ua_mask, dtype=bool))
    else:
        eligible = np.arange(n_total)
    # i.i.d. priorities: the m smallest form a uniform m-subset, and the key
    # order is reproducible for any budget prefix
    keys = np.random.default_rng(seed).random(eligible.size)
    return _plan_from_ranking(eligible, keys, n_total, cost, budget, POLICY_RANDOM)


def baseline_max_au(
    entropies, ua_mask, cost: CostModel, budget: Optional[float] = None
) -> QueryPlan:
    """Highest-entropy statically-UA samples first (selection key: -entropy)."""
    h = np.asarray(entropies, dtype=np.float64)
    mask = np.asarray(ua_mask, dtype=bool)
    if h.shape != mask.shape or h.ndim != 1:
        raise ValidationError("entropies and ua_mask must be matching 1-D arrays")
    eligible = np.flatnonzero(mask)
    if not np.all(np.isfinite(h[eligible])):
        raise ValidationError("every UA sample must carry a finite entropy")
    return _plan_from_ranking(eligible, -h[eligible], h.size, cost, budget, POLICY_MAXAU)


def fuse_predictions(
    li_probs, hi_probs, plan: QueryPlan
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample probabilities after querying: HI where selected, LI elsewhere.

    Returns (fused_probs, provenance) with provenance entries 'LI'/'HI'.
    hi_probs must be finite at every selected row.
    """
    li = np.asarray(li_probs)
    hi = np.asarray(hi_probs)
    if li.ndim != 2 or li.shape != hi.shape:
        raise ValidationError("li_probs and hi_probs must be matching (n, C) arrays")
    if li.shape[0] != plan.n_total:
        raise ValidationError("plan and probability arrays disagree on sample count")
    if plan.selected.size:
        if np.any(plan.selected < 0) or np.any(plan.selected >= li.shape[0]):
            raise ValidationError("plan indices out of range")
        if not np.all(np.isfinite(hi[plan.selected])):
            raise ValidationError("missing HI probabilities for selected samples")
    fused = li.copy()
    fused[plan.selected] = hi[plan.selected]
    provenance = np.full(li.shape[0], DOMAIN_LI, dtype="<U2")
    provenance[plan.selected] = DOMAIN_HI
    return fused, provenance


def fused_certainty_tags(dyn_tags, plan: QueryPlan, hi_static_tags) -> np.ndarray:
    """Post-fusion certainty: queried samples adopt their HI static tag.

    Unqueried samples keep their dynamic tag, so 'certain' after fusion means
    tag C, covering both originally-certain samples and queried samples that
    became certain at HI.
    """
    tags = np.asarray(dyn_tags).astype("<U3").copy()
    hi_tags = np.asarray(hi_static_tags)
    if tags.shape != hi_tags.shape:
        raise ValidationError("dyn_tags and hi_static_tags must match in length")
    tags[plan.selected] = hi_tags[plan.selected]
    return tags
