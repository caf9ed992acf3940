"""Dynamic four-way taxonomy over paired LI/HI data, and its blind surrogate.

The oracle refines the static LI tag using the paired HI tag:

    C    if LI tag = C                    (HI never consulted)
    UAR  if LI tag = UA and HI tag = C    (ambiguity resolvable by re-imaging)
    UAI  if LI tag = UA and HI tag != C   (ambiguity persists at HI)
    UE   if LI tag = UE

At test time HI data does not exist, so UAR vs UAI is approximated from the
LI latent vector alone: calibration pairs (where both domains are available)
are partitioned by the oracle, one prototype bank is fitted per partition on
the LI features, and a test sample is assigned to whichever prototype is
closer. Ties break to UAI, the non-querying choice. The distance to the UAR
bank is also reported; ascending order of that score is the query priority.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import (
    DOMAIN_HI,
    DOMAIN_LI,
    FeatureSet,
    StaticLabel,
    Thresholds,
    TAG_ALEATORIC,
    TAG_CERTAIN,
    TAG_EPISTEMIC,
    classify_static_batch,
    entropy,
)
from .distance import (
    DEFAULT_SHRINKAGE,
    GaussianBank,
    NeighborBank,
    PcaProjector,
    fit_gaussian_bank,
    fit_neighbor_bank,
    knn_scores,
    mahalanobis_scores,
)
from .errors import DegenerateTaxonomyError, ValidationError

TAG_RESOLVABLE = "UAR"
TAG_IRRESOLVABLE = "UAI"
DYNAMIC_TAGS = (TAG_CERTAIN, TAG_RESOLVABLE, TAG_IRRESOLVABLE, TAG_EPISTEMIC)

BACKEND_MAHALANOBIS = "mahalanobis"
BACKEND_KNN = "knn"
BACKENDS = (BACKEND_MAHALANOBIS, BACKEND_KNN)

SOURCE_ORACLE = "oracle"
SOURCE_SURROGATE = "surrogate"


@dataclass(frozen=True)
class DynamicLabel:
    """Fine-grained tag for one sample plus how it was obtained."""

    tag: str
    source: str

    def __post_init__(self):
        if self.tag not in DYNAMIC_TAGS:
            raise ValidationError(f"tag must be one of {DYNAMIC_TAGS}, got {self.tag!r}")
        if self.source not in (SOURCE_ORACLE, SOURCE_SURROGATE):
            raise ValidationError(f"unknown source {self.source!r}")


def classify_dynamic_oracle(li_label: StaticLabel, hi_label: StaticLabel) -> DynamicLabel:
    """Exact dynamic tag from paired static labels."""
    tag = classify_dynamic_oracle_batch(
        np.array([li_label.tag]), np.array([hi_label.tag])
    )[0]
    return DynamicLabel(str(tag), SOURCE_ORACLE)


def classify_dynamic_oracle_batch(li_tags: np.ndarray, hi_tags: np.ndarray) -> np.ndarray:
    """Vectorized oracle; HI tags are ignored wherever the LI tag is not UA."""
    li = np.asarray(li_tags)
    hi = np.asarray(hi_tags)
    if li.shape != hi.shape or li.ndim != 1:
        raise ValidationError("li_tags and hi_tags must be matching 1-D arrays")
    out = np.where(
        li == TAG_CERTAIN,
        TAG_CERTAIN,
        np.where(
            li == TAG_EPISTEMIC,
            TAG_EPISTEMIC,
            np.where(hi == TAG_CERTAIN, TAG_RESOLVABLE, TAG_IRRESOLVABLE),
        ),
    )
    return out.astype("<U3")


Bank = Union[GaussianBank, NeighborBank]


@dataclass
class ResolvabilityBanks:
    """LI-latent prototype banks for the UAR and UAI partitions."""

    bank_uar: Bank
    bank_uai: Bank
    backend: str
    projector: Optional[PcaProjector] = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValidationError(f"backend must be one of {BACKENDS}, got {self.backend!r}")

    def distances(self, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(d_uar, d_uai) for a batch of LI feature vectors."""
        z = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if self.projector is not None:
            z = self.projector.project(z)
        if self.backend == BACKEND_MAHALANOBIS:
            d_uar, _ = mahalanobis_scores(z, self.bank_uar)
            d_uai, _ = mahalanobis_scores(z, self.bank_uai)
        else:
            d_uar = knn_scores(z, self.bank_uar)
            d_uai = knn_scores(z, self.bank_uai)
        return d_uar, d_uai


def _li_features_of(data) -> np.ndarray:
    if isinstance(data, FeatureSet):
        if data.domain != DOMAIN_LI:
            raise ValidationError(f"expected LI-domain records, got {data.domain}")
        return data.features
    return np.asarray(data, dtype=np.float64)


def build_resolvability_banks(
    li: FeatureSet,
    hi: FeatureSet,
    li_eu: np.ndarray,
    hi_eu: np.ndarray,
    li_thresholds: Thresholds,
    hi_thresholds: Thresholds,
    backend: str = BACKEND_MAHALANOBIS,
    shrinkage: float = DEFAULT_SHRINKAGE,
    k: int = 100,
    projector: Optional[PcaProjector] = None,
) -> ResolvabilityBanks:
    """Partition calibration pairs with the oracle and fit one bank per side.

    Mahalanobis banks get a single centroid each and share one covariance
    pooled over both partitions; KNN banks store the raw partition points
    with k clamped to the partition size. Raises DegenerateTaxonomyError if
    either partition has fewer than two members.
    """
    if backend not in BACKENDS:
        raise ValidationError(f"backend must be one of {BACKENDS}, got {backend!r}")
    if li.domain != DOMAIN_LI or hi.domain != DOMAIN_HI:
        raise ValidationError("calibration pairs must supply an LI set and an HI set")
    if len(li) != len(hi):
        raise ValidationError("calibration pairs must align one-to-one")

    li_tags = classify_static_batch(li_eu, entropy(li.probs), li_thresholds)
    hi_tags = classify_static_batch(hi_eu, entropy(hi.probs), hi_thresholds)
    dyn = classify_dynamic_oracle_batch(li_tags, hi_tags)

    feats = li.features.astype(np.float64)
    if projector is not None:
        feats = projector.project(feats)
    part_uar = feats[dyn == TAG_RESOLVABLE]
    part_uai = feats[dyn == TAG_IRRESOLVABLE]
    for name, part in ((TAG_RESOLVABLE, part_uar), (TAG_IRRESOLVABLE, part_uai)):
        if part.shape[0] < 2:
            raise DegenerateTaxonomyError(
                f"calibration produced {part.shape[0]} {name} member(s); "
                "cannot fit a resolvability surrogate"
            )

    if backend == BACKEND_MAHALANOBIS:
        stacked = np.vstack([part_uar, part_uai])
        groups = np.concatenate(
            [np.zeros(part_uar.shape[0], dtype=np.int64), np.ones(part_uai.shape[0], dtype=np.int64)]
        )
        pooled = fit_gaussian_bank(stacked, groups, shrinkage=shrinkage)
        bank_uar = GaussianBank(
            means=pooled.means[:1], cov_inv=pooled.cov_inv,
            group_ids=np.array([0]), shrinkage=shrinkage,
        )
        bank_uai = GaussianBank(
            means=pooled.means[1:], cov_inv=pooled.cov_inv,
            group_ids=np.array([0]), shrinkage=shrinkage,
        )
    else:
        bank_uar = fit_neighbor_bank(part_uar, k=min(k, part_uar.shape[0]))
        bank_uai = fit_neighbor_bank(part_uai, k=min(k, part_uai.shape[0]))
    return ResolvabilityBanks(bank_uar=bank_uar, bank_uai=bank_uai, backend=backend, projector=projector)


def classify_dynamic_surrogate_batch(
    li, li_tags: np.ndarray, banks: ResolvabilityBanks
) -> tuple[np.ndarray, np.ndarray]:
    """Blind dynamic tags plus the UAR-bank distance used for query ranking.

    C and UE pass through untouched (banks never consulted); UA samples get
    UAR iff d(z; UAR bank) < d(z; UAI bank), UAI on ties. The second return
    value holds d(z; UAR bank) for UA samples and NaN elsewhere.
    """
    feats = _li_features_of(li)
    tags = np.asarray(li_tags)
    if tags.shape != (feats.shape[0],):
        raise ValidationError("li_tags must supply one static tag per record")

    dyn = tags.astype("<U3").copy()
    rank = np.full(feats.shape[0], np.nan)
    ua = tags == TAG_ALEATORIC
    if np.any(ua):
        d_uar, d_uai = banks.distances(feats[ua])
        dyn[ua] = np.where(d_uar < d_uai, TAG_RESOLVABLE, TAG_IRRESOLVABLE)
        rank[ua] = d_uar
    return dyn, rank


def classify_dynamic_surrogate(
    li_record, li_label: StaticLabel, banks: ResolvabilityBanks
) -> tuple[DynamicLabel, float]:
    """Single-sample surrogate; returns the label and d(z; UAR bank) (NaN unless UA)."""
    feats = np.asarray(
        li_record.features if hasattr(li_record, "features") else li_record, dtype=np.float64
    )
    if hasattr(li_record, "domain") and li_record.domain != DOMAIN_LI:
        raise ValidationError(f"surrogate expects LI-domain records, got {li_record.domain}")
    dyn, rank = classify_dynamic_surrogate_batch(feats[None, :], np.array([li_label.tag]), banks)
    return DynamicLabel(str(dyn[0]), SOURCE_SURROGATE), float(rank[0])


@dataclass(frozen=True)
class AgreementReport:
    """One-vs-rest F1 of surrogate vs oracle on the oracle's UA population."""

    f1_uar: float
    f1_uai: float

    @property
    def mean_f1(self) -> float:
        return 0.5 * (self.f1_uar + self.f1_uai)


def _binary_f1(truth: np.ndarray, pred: np.ndarray) -> float:
    tp = int(np.sum(truth & pred))
    fp = int(np.sum(~truth & pred))
    fn = int(np.sum(truth & ~pred))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def surrogate_agreement(oracle_tags, surrogate_tags) -> AgreementReport:
    """Per-tag F1 restricted to samples the oracle calls UAR or UAI."""
    oracle = np.asarray(oracle_tags)
    surr = np.asarray(surrogate_tags)
    if oracle.shape != surr.shape or oracle.ndim != 1:
        raise ValidationError("oracle and surrogate tag lists must match in length")
    mask = (oracle == TAG_RESOLVABLE) | (oracle == TAG_IRRESOLVABLE)
    o, s = oracle[mask], surr[mask]
    return AgreementReport(
        f1_uar=_binary_f1(o == TAG_RESOLVABLE, s == TAG_RESOLVABLE),
        f1_uai=_binary_f1(o == TAG_IRRESOLVABLE, s == TAG_IRRESOLVABLE),
    )
