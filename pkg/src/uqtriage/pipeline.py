"""End-to-end stages shared by the CLI and the test harness.

fit -> taxonomy -> plan -> fuse -> evaluate, operating on index-aligned
LI/HI FeatureSets. Calibration uses labeled records only (prototype banks are
fitted over annotated data; out-of-distribution records carry no labels), and
the LI labels drive stratification and class grouping in both domains.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .adaptive import (
    POLICY_FINEGRAINED,
    POLICY_MAXAU,
    POLICY_RANDOM,
    CostModel,
    QueryPlan,
    baseline_max_au,
    baseline_random,
    fuse_predictions,
    fused_certainty_tags,
    select_queries,
)
from .artifacts import FusedTable, RunConfig, TagTable
from .calibrate import calibrate_tau_au, calibrate_tau_eu, sample_calibration_set
from .core import (
    DOMAIN_HI,
    DOMAIN_LI,
    FeatureSet,
    TAG_ALEATORIC,
    Thresholds,
    classify_static_batch,
    entropy,
)
from .distance import (
    GaussianBank,
    fit_gaussian_bank,
    fit_neighbor_bank,
    fit_pca,
    knn_scores,
    mahalanobis_scores,
)
from .dynamic import (
    BACKEND_MAHALANOBIS,
    SOURCE_ORACLE,
    SOURCE_SURROGATE,
    TAG_IRRESOLVABLE,
    TAG_RESOLVABLE,
    build_resolvability_banks,
    classify_dynamic_oracle_batch,
    classify_dynamic_surrogate_batch,
)
from .errors import ValidationError
from .fdmp import FittedModel
from .metrics import EvalReport, aucc, budget_auc, ece, kendall_tau, macro_f1, p_accurate_certain
from .synth import SynthConfig


def synth_config(cfg: RunConfig) -> SynthConfig:
    return SynthConfig(
        n_samples=cfg.n_samples,
        n_classes=cfg.n_classes,
        d_hi=cfg.d_hi,
        d_li=cfg.d_li,
        sep_hi=cfg.sep_hi,
        sep_li=cfg.sep_li,
        frac_uar=cfg.frac_uar,
        frac_uai=cfg.frac_uai,
        frac_ue=cfg.frac_ue,
        noise_li=cfg.noise_li,
        seed=cfg.seed,
    )


def _check_paired(li: FeatureSet, hi: FeatureSet) -> None:
    if li.domain != DOMAIN_LI or hi.domain != DOMAIN_HI:
        raise ValidationError("expected an LI set and an HI set (check the domain bytes)")
    if len(li) != len(hi):
        raise ValidationError(f"paired sets must align: {len(li)} LI vs {len(hi)} HI records")


def _score_bank(bank, features) -> np.ndarray:
    if isinstance(bank, GaussianBank):
        return mahalanobis_scores(features, bank)[0]
    return knn_scores(features, bank)


def compute_eu(model: FittedModel, features, domain: str) -> np.ndarray:
    """EU scores against the fitted calibration bank of the given domain."""
    return _score_bank(model.eu_bank(domain), features)


def fit_model(
    li: FeatureSet,
    hi: FeatureSet,
    cfg: RunConfig,
    groups=None,
) -> FittedModel:
    """Calibrate thresholds and fit all distance banks from paired records."""
    _check_paired(li, hi)
    labeled = li.labeled_mask()
    if not labeled.any():
        raise ValidationError("calibration requires labeled records")
    lab_idx = np.flatnonzero(labeled)
    sub_li = li.take(lab_idx)
    sub_hi = hi.take(lab_idx)
    sub_groups = None if groups is None else np.asarray(groups)[lab_idx]

    target = min(cfg.calib_size, len(sub_li))
    cal = sample_calibration_set(sub_li, target, cfg.seed, groups=sub_groups)
    dv_li = sub_li.take(cal.indices)
    dv_hi = sub_hi.take(cal.indices)

    thresholds = {}
    banks = {}
    eu_dv = {}
    for domain, dv in ((DOMAIN_LI, dv_li), (DOMAIN_HI, dv_hi)):
        if cfg.backend == BACKEND_MAHALANOBIS:
            bank = fit_gaussian_bank(dv.features, dv.labels, shrinkage=cfg.shrinkage)
        else:
            bank = fit_neighbor_bank(dv.features, k=min(cfg.k, len(dv)))
        eu = _score_bank(bank, dv.features)
        tau_eu = calibrate_tau_eu(eu, cfg.tpr)
        h = entropy(dv.probs)
        accurate = dv.probs.argmax(axis=1) == dv.labels
        tau_au = calibrate_tau_au(h, accurate, eu, tau_eu, dv.n_classes)
        banks[domain] = bank
        eu_dv[domain] = eu
        thresholds[domain] = Thresholds(tau_eu, tau_au, domain)

    projector = None
    if cfg.pca_dims > 0:
        li_tags = classify_static_batch(eu_dv[DOMAIN_LI], entropy(dv_li.probs), thresholds[DOMAIN_LI])
        hi_tags = classify_static_batch(eu_dv[DOMAIN_HI], entropy(dv_hi.probs), thresholds[DOMAIN_HI])
        dyn = classify_dynamic_oracle_batch(li_tags, hi_tags)
        ua = (dyn == TAG_RESOLVABLE) | (dyn == TAG_IRRESOLVABLE)
        if ua.sum() < 2:
            raise ValidationError("too few UA calibration samples to fit a projection")
        projector = fit_pca(dv_li.features[ua], cfg.pca_dims)

    resolvability = build_resolvability_banks(
        dv_li,
        dv_hi,
        eu_dv[DOMAIN_LI],
        eu_dv[DOMAIN_HI],
        thresholds[DOMAIN_LI],
        thresholds[DOMAIN_HI],
        backend=cfg.backend,
        shrinkage=cfg.shrinkage,
        k=cfg.k,
        projector=projector,
    )
    return FittedModel(
        backend=cfg.backend,
        n_classes=li.n_classes,
        li_thresholds=thresholds[DOMAIN_LI],
        hi_thresholds=thresholds[DOMAIN_HI],
        li_eu_bank=banks[DOMAIN_LI],
        hi_eu_bank=banks[DOMAIN_HI],
        resolvability=resolvability,
    )


def apply_taxonomy(
    model: FittedModel, li: FeatureSet, hi: Optional[FeatureSet] = None
) -> TagTable:
    """Static plus dynamic tags for every LI record.

    Without HI data the dynamic tags come from the latent surrogate; with the
    paired HI set they come from the exact oracle. The UAR-bank distance is
    reported either way, since query ranking needs it.
    """
    if li.domain != DOMAIN_LI:
        raise ValidationError(f"taxonomy runs on LI records, got {li.domain}")
    eu = compute_eu(model, li.features, DOMAIN_LI)
    h = entropy(li.probs)
    static = classify_static_batch(eu, h, model.li_thresholds)
    dyn, rank = classify_dynamic_surrogate_batch(li.features, static, model.resolvability)
    source = SOURCE_SURROGATE
    if hi is not None:
        _check_paired(li, hi)
        hi_eu = compute_eu(model, hi.features, DOMAIN_HI)
        hi_static = classify_static_batch(hi_eu, entropy(hi.probs), model.hi_thresholds)
        dyn = classify_dynamic_oracle_batch(static, hi_static)
        source = SOURCE_ORACLE
    return TagTable(
        static_tags=static, dyn_tags=dyn, eu=eu, entropy=h, rank=rank, source=source
    )


def make_plan(
    table: TagTable,
    cost: CostModel,
    budget: Optional[float],
    policy: str = POLICY_FINEGRAINED,
    seed: int = 0,
    random_pool: str = "all",
) -> QueryPlan:
    ua_mask = table.static_tags == TAG_ALEATORIC
    if policy == POLICY_FINEGRAINED:
        return select_queries(table.dyn_tags, table.rank, cost, budget)
    if policy == POLICY_RANDOM:
        return baseline_random(len(table), cost, budget, seed, pool=random_pool, ua_mask=ua_mask)
    if policy == POLICY_MAXAU:
        return baseline_max_au(table.entropy, ua_mask, cost, budget)
    raise ValidationError(f"unknown policy {policy!r}")


def fuse(
    model: FittedModel,
    li: FeatureSet,
    hi: FeatureSet,
    table: TagTable,
    plan: QueryPlan,
) -> tuple[FeatureSet, FusedTable]:
    """Apply a query plan: fused probabilities plus post-fusion certainty tags."""
    _check_paired(li, hi)
    if len(table) != len(li):
        raise ValidationError("tag table and record set disagree on sample count")
    fused_probs, provenance = fuse_predictions(li.probs, hi.probs, plan)
    hi_eu = compute_eu(model, hi.features, DOMAIN_HI)
    hi_static = classify_static_batch(hi_eu, entropy(hi.probs), model.hi_thresholds)
    tags = fused_certainty_tags(table.dyn_tags, plan, hi_static)
    eu_out = np.where(provenance == DOMAIN_HI, hi_eu, table.eu)
    fused_set = FeatureSet(
        features=li.features,
        probs=fused_probs,
        labels=li.labels,
        coords=li.coords,
        domain=DOMAIN_LI,
        height=li.height,
        width=li.width,
    )
    fused_table = FusedTable(
        provenance=provenance, tags=tags, eu=eu_out, entropy=entropy(fused_probs)
    )
    return fused_set, fused_table


def evaluate(
    probs: np.ndarray,
    true_labels: np.ndarray,
    tags: np.ndarray,
    eu: np.ndarray,
    entropies: np.ndarray,
    n_bins: int,
    coverage_grid,
) -> EvalReport:
    """Full metric bundle for one prediction set."""
    probs = np.asarray(probs)
    pred = probs.argmax(axis=1)
    f1, per_class = macro_f1(pred, true_labels, probs.shape[1])
    ece_value = ece(probs, true_labels, n_bins=n_bins)
    pac = p_accurate_certain(pred, true_labels, tags)
    try:
        tau = kendall_tau(eu, entropies)
    except ValidationError:
        tau = None  # a fully tied score column carries no rank information
    aucc_value, curve = aucc(probs, true_labels, eu, coverage_grid, n_bins=n_bins)
    return EvalReport(
        macro_f1=f1,
        ece=ece_value,
        p_accurate_certain=pac,
        kendall_tau=tau,
        aucc=aucc_value,
        per_class_f1=per_class,
        curve_points=curve,
    )


def sweep_budgets(
    model: FittedModel,
    li: FeatureSet,
    hi: FeatureSet,
    table: TagTable,
    true_labels: np.ndarray,
    budgets,
    cost: CostModel,
    policy: str = POLICY_FINEGRAINED,
    seed: int = 0,
    random_pool: str = "all",
    n_bins: int = 15,
) -> dict:
    """Metrics along a budget grid plus their normalized integrals."""
    budgets = [float(b) for b in budgets]
    if len(budgets) < 2 or any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise ValidationError("need at least two strictly increasing budgets")
    curve = []
    for budget in budgets:
        plan = make_plan(table, cost, budget, policy, seed, random_pool)
        fused_set, fused_table = fuse(model, li, hi, table, plan)
        pred = fused_set.probs.argmax(axis=1)
        f1, _ = macro_f1(pred, true_labels, fused_set.n_classes)
        curve.append(
            {
                "budget": budget,
                "realized_cost": plan.realized_cost,
                "n_queried": len(plan),
                "f1": f1,
                "ece": ece(fused_set.probs, true_labels, n_bins=n_bins),
                "pac": p_accurate_certain(pred, true_labels, fused_table.tags),
            }
        )
    report = {"policy": policy, "curve": curve}
    for key in ("f1", "ece", "pac"):
        report[f"int_{key}"] = budget_auc([(pt["budget"], pt[key]) for pt in curve])
    return report
