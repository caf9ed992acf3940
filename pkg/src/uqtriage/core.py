"""Domain types, entropy scoring, and the static three-way uncertainty taxonomy.

A sample is described by a latent feature vector z, a softmax probability
vector pi on the (C-1)-simplex, and an optional ground-truth label. Epistemic
uncertainty (EU) is a latent-space distance computed elsewhere; aleatoric
uncertainty (AU) is the Shannon entropy of pi in nats, defined only for low-EU
samples:

    AU = H[pi] = -sum_i pi_i * ln(pi_i)      if EU < tau_EU, else n/a

The static decision function maps (EU, AU) to one of three tags:

    C  (certain)              EU < tau_EU  and  H[pi] <  tau_AU
    UA (uncertain-aleatoric)  EU < tau_EU  and  H[pi] >= tau_AU
    UE (uncertain-epistemic)  EU >= tau_EU

Boundary conventions are strict `<` for the certain/low-EU side and `>=` for
the uncertain side. All functions here are pure and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import ValidationError

# Static tags
TAG_CERTAIN = "C"
TAG_ALEATORIC = "UA"
TAG_EPISTEMIC = "UE"
STATIC_TAGS = (TAG_CERTAIN, TAG_ALEATORIC, TAG_EPISTEMIC)

# Domain tags for the two imaging qualities
DOMAIN_LI = "LI"
DOMAIN_HI = "HI"
DOMAINS = (DOMAIN_LI, DOMAIN_HI)

SIMPLEX_ATOL = 1e-6
# float32 storage introduces up to ~C*eps32 of sum error; ingestion uses this
# looser tolerance, scoring keeps the strict one.
SIMPLEX_ATOL_F32 = 1e-5

# Sentinel for a missing per-record label in integer label arrays.
LABEL_MISSING = -1


def check_simplex(probs: np.ndarray, atol: float = SIMPLEX_ATOL) -> np.ndarray:
    """Validate probability vectors (last axis) and return them as float64.

    Entries must lie in [0, 1] and sum to 1 within `atol`. Accepts a single
    vector (C,) or a batch (n, C) with C >= 2.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim not in (1, 2) or p.shape[-1] < 2:
        raise ValidationError(f"expected (C,) or (n, C) with C >= 2, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValidationError("probability vector contains non-finite entries")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValidationError("probability entries must lie in [0, 1]")
    sums = p.sum(axis=-1)
    bad = np.abs(sums - 1.0) > atol
    if np.any(bad):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise ValidationError(f"probability rows must sum to 1 within {atol:g} (worst off by {worst:.3g})")
    return p


def entropy(probs: np.ndarray, atol: float = SIMPLEX_ATOL) -> np.ndarray | float:
    """Shannon entropy in nats, with the 0*ln(0) := 0 convention.

    Vectorized over the last axis: a (C,) input yields a float, an (n, C)
    input yields an (n,) array. Result lies in [0, ln C].
    """
    p = check_simplex(probs, atol=atol)
    terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    h = -terms.sum(axis=-1)
    # clip the -0.0 / tiny negative residue of one-hot inputs
    h = np.maximum(h, 0.0)
    return float(h) if h.ndim == 0 else h


@dataclass(frozen=True)
class Thresholds:
    """Per-domain decision thresholds tau_EU and tau_AU (nats)."""

    tau_eu: float
    tau_au: float
    domain: str = DOMAIN_LI

    def __post_init__(self):
        if not (np.isfinite(self.tau_eu) and self.tau_eu > 0):
            raise ValidationError(f"tau_eu must be finite and positive, got {self.tau_eu}")
        if not (np.isfinite(self.tau_au) and self.tau_au >= 0):
            raise ValidationError(f"tau_au must be finite and non-negative, got {self.tau_au}")
        if self.domain not in DOMAINS:
            raise ValidationError(f"domain must be one of {DOMAINS}, got {self.domain!r}")


@dataclass(frozen=True)
class StaticLabel:
    """Outcome of the static taxonomy for one sample.

    `au_score` is populated exactly when the sample is low-EU (tag C or UA);
    for UE the entropy estimate is undefined and left as None.
    """

    tag: str
    eu_score: float
    au_score: Optional[float] = None

    def __post_init__(self):
        if self.tag not in STATIC_TAGS:
            raise ValidationError(f"tag must be one of {STATIC_TAGS}, got {self.tag!r}")
        if (self.au_score is None) != (self.tag == TAG_EPISTEMIC):
            raise ValidationError("au_score must be present iff the sample is low-EU (tag C or UA)")


@dataclass(frozen=True)
class FeatureRecord:
    """One sample: latent features, probability vector, optional label/coord."""

    features: np.ndarray
    probs: np.ndarray
    label: Optional[int] = None
    coord: Optional[tuple[int, int]] = None
    domain: str = DOMAIN_LI

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 1 or feats.size == 0:
            raise ValidationError("features must be a non-empty 1-D vector")
        p = check_simplex(self.probs)
        if self.label is not None and not (0 <= int(self.label) < p.shape[-1]):
            raise ValidationError(f"label {self.label} outside [0, {p.shape[-1]})")
        if self.coord is not None:
            r, c = self.coord
            if r < 0 or c < 0:
                raise ValidationError("coord entries must be non-negative")
        if self.domain not in DOMAINS:
            raise ValidationError(f"domain must be one of {DOMAINS}, got {self.domain!r}")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "probs", p)


@dataclass
class FeatureSet:
    """Columnar batch of samples from one domain.

    features: (n, d) float array; probs: (n, C); labels: (n,) int array with
    LABEL_MISSING marking unlabeled records, or None when no record carries a
    label; coords: (n, 2) int array or None; height/width are grid dims when
    the set is a row-major dense map (0 for plain record lists).
    """

    features: np.ndarray
    probs: np.ndarray
    labels: Optional[np.ndarray] = None
    coords: Optional[np.ndarray] = None
    domain: str = DOMAIN_LI
    height: int = 0
    width: int = 0

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features)
        self.probs = np.ascontiguousarray(self.probs)
        if self.features.ndim != 2 or self.probs.ndim != 2:
            raise ValidationError("features and probs must be 2-D (n, d) / (n, C) arrays")
        if self.features.shape[0] != self.probs.shape[0]:
            raise ValidationError("features and probs disagree on sample count")
        if self.probs.shape[1] < 2:
            raise ValidationError("need at least two classes")
        if self.domain not in DOMAINS:
            raise ValidationError(f"domain must be one of {DOMAINS}, got {self.domain!r}")
        n = self.features.shape[0]
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ValidationError("labels must be a (n,) array")
            valid = self.labels != LABEL_MISSING
            if np.any((self.labels[valid] < 0) | (self.labels[valid] >= self.n_classes)):
                raise ValidationError("labels outside [0, C)")
        if self.coords is not None:
            self.coords = np.asarray(self.coords, dtype=np.int64)
            if self.coords.shape != (n, 2) or np.any(self.coords < 0):
                raise ValidationError("coords must be a non-negative (n, 2) array")
        if (self.height > 0) != (self.width > 0):
            raise ValidationError("height and width must both be set or both be 0")
        if self.height > 0 and self.height * self.width != n:
            raise ValidationError(f"grid dims {self.height}x{self.width} do not match n={n}")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[1]

    @property
    def is_grid(self) -> bool:
        return self.height > 0

    def labeled_mask(self) -> np.ndarray:
        """Boolean mask of records that carry a label."""
        if self.labels is None:
            return np.zeros(len(self), dtype=bool)
        return self.labels != LABEL_MISSING

    def record(self, i: int) -> FeatureRecord:
        label = None
        if self.labels is not None and self.labels[i] != LABEL_MISSING:
            label = int(self.labels[i])
        coord = None
        if self.coords is not None:
            coord = (int(self.coords[i, 0]), int(self.coords[i, 1]))
        return FeatureRecord(self.features[i], self.probs[i], label, coord, self.domain)

    def records(self) -> Iterator[FeatureRecord]:
        return (self.record(i) for i in range(len(self)))

    def take(self, idx: np.ndarray) -> "FeatureSet":
        """Subset by index array; grid structure is dropped."""
        idx = np.asarray(idx)
        return FeatureSet(
            features=self.features[idx],
            probs=self.probs[idx],
            labels=None if self.labels is None else self.labels[idx],
            coords=None if self.coords is None else self.coords[idx],
            domain=self.domain,
        )

    @staticmethod
    def from_records(records: Sequence[FeatureRecord]) -> "FeatureSet":
        if not records:
            raise ValidationError("empty record list")
        domain = records[0].domain
        feats = np.stack([r.features for r in records])
        probs = np.stack([r.probs for r in records])
        labels = None
        if any(r.label is not None for r in records):
            labels = np.array(
                [LABEL_MISSING if r.label is None else r.label for r in records], dtype=np.int64
            )
        coords = None
        if all(r.coord is not None for r in records):
            coords = np.array([r.coord for r in records], dtype=np.int64)
        return FeatureSet(feats, probs, labels, coords, domain)


def classify_static(eu: float, probs: np.ndarray, thresholds: Thresholds) -> StaticLabel:
    """Apply the static three-way decision rule to one sample.

    UE iff eu >= tau_EU (entropy never consulted); otherwise UA iff
    H[probs] >= tau_AU, else C.
    """
    if not np.isfinite(eu) or eu < 0:
        raise ValidationError(f"eu score must be finite and non-negative, got {eu}")
    if eu >= thresholds.tau_eu:
        return StaticLabel(TAG_EPISTEMIC, float(eu))
    au = float(entropy(probs))
    tag = TAG_ALEATORIC if au >= thresholds.tau_au else TAG_CERTAIN
    return StaticLabel(tag, float(eu), au)


def classify_static_batch(
    eu_scores: np.ndarray, entropies: np.ndarray, thresholds: Thresholds
) -> np.ndarray:
    """Vectorized static taxonomy over precomputed EU and entropy arrays.

    Returns an (n,) array of tag strings. `entropies` is ignored wherever
    eu >= tau_EU, matching the n/a convention for AU.
    """
    eu = np.asarray(eu_scores, dtype=np.float64)
    h = np.asarray(entropies, dtype=np.float64)
    if eu.shape != h.shape or eu.ndim != 1:
        raise ValidationError("eu_scores and entropies must be matching 1-D arrays")
    if np.any(~np.isfinite(eu)) or np.any(eu < 0):
        raise ValidationError("eu scores must be finite and non-negative")
    tags = np.where(
        eu >= thresholds.tau_eu,
        TAG_EPISTEMIC,
        np.where(h >= thresholds.tau_au, TAG_ALEATORIC, TAG_CERTAIN),
    )
    return tags.astype("<U3")
