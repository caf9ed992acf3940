"""Synthetic paired LI/HI dataset generator with planted uncertainty categories.

Class clusters are unit-variance isotropic Gaussians centered on scaled
orthogonal axes, so every pair of class centroids sits `sep` apart (in cluster
sigma units) in its domain. Categories are planted so each behaves correctly
under the full pipeline:

* C   - features in a class cluster in both domains; near-one-hot probs.
* UAR - LI features between two class centroids, nudged toward the wrong one
        (mixed probs, systematically inaccurate at LI); HI features in the
        true class's clean cluster, so HI resolves them.
* UAI - between-centroid placement in BOTH domains (a different class pair
        than UAR, so the LI latent separates the two populations); ambiguous
        and inaccurate everywhere.
* UE  - LI features displaced radially at least 6 sigma away from every
        cluster; unlabeled (out-of-distribution data carries no annotation),
        recorded in the planted truth only.

Probabilities are the temperature-1 softmax of negative squared distances to
the class centroids, evaluated at the sample's placement locus (with a small
placement jitter for diversity); features add unit sampling noise on top of
the same locus, which couples entropy to latent position without letting
cluster noise flip the planted ambiguity. Everything is deterministic given
the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DOMAIN_HI, DOMAIN_LI, LABEL_MISSING, FeatureSet
from .errors import ValidationError

TAG_ORDER = ("C", "UAR", "UAI", "UE")

# Placement jitter feeding the probability model; small enough that planted
# argmax outcomes keep their sign (log-odds target is ~6 sigma away from 0).
_PROB_JITTER = 0.0125
# Target log-odds of the wrong class at ambiguous placements.
_TARGET_LOG_ODDS = 1.3
_MAX_BIAS = 0.2
# Out-of-distribution displacement floor (sigma units) and separation factor.
_UE_MIN_SHIFT = 6.0
_UE_SHIFT_FACTOR = 1.25

# Fixed mixing pairs: (true class, distractor). Disjoint pairs keep the UAR
# and UAI populations apart in latent space.
_UAR_PAIR = (0, 1)
_UAI_PAIR = (2, 3)


@dataclass(frozen=True)
class SynthConfig:
    """Generator knobs; separations are in units of the cluster noise sigma."""

    n_samples: int = 20000
    n_classes: int = 6
    d_hi: int = 64
    d_li: int = 16
    sep_hi: float = 8.0
    sep_li: float = 8.0
    frac_uar: float = 0.2
    frac_uai: float = 0.1
    frac_ue: float = 0.1
    noise_li: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValidationError("n_samples must be positive")
        if self.n_classes < 2:
            raise ValidationError("need at least two classes")
        if self.d_li > self.d_hi:
            raise ValidationError("d_li must not exceed d_hi")
        if self.sep_li <= 0 or self.sep_hi <= 0:
            raise ValidationError("separations must be positive")
        if self.noise_li < 0:
            raise ValidationError("noise_li must be non-negative")
        for name in ("frac_uar", "frac_uai", "frac_ue"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.frac_c < -1e-9:
            raise ValidationError("category fractions exceed 1")
        if self.n_classes > min(self.d_li, self.d_hi):
            raise ValidationError(
                "infeasible geometry: need n_classes <= min(d_li, d_hi) for "
                "orthogonal class centroids"
            )
        if self.frac_uar > 0 and self.frac_uai > 0 and self.n_classes < 4:
            raise ValidationError(
                "infeasible geometry: disjoint UAR/UAI mixing pairs need >= 4 classes"
            )

    @property
    def frac_c(self) -> float:
        return 1.0 - (self.frac_uar + self.frac_uai + self.frac_ue)


@dataclass
class SynthResult:
    """Index-aligned paired sets plus the planted ground truth."""

    li: FeatureSet
    hi: FeatureSet
    planted_tags: np.ndarray   # '<U3' planted dynamic category per sample
    true_labels: np.ndarray    # generating class, including for UE samples

    def __len__(self) -> int:
        return len(self.planted_tags)


def _category_counts(cfg: SynthConfig) -> dict[str, int]:
    fracs = {"C": cfg.frac_c, "UAR": cfg.frac_uar, "UAI": cfg.frac_uai, "UE": cfg.frac_ue}
    quotas = {tag: cfg.n_samples * f for tag, f in fracs.items()}
    counts = {tag: int(math.floor(q)) for tag, q in quotas.items()}
    short = cfg.n_samples - sum(counts.values())
    remainders = sorted(
        TAG_ORDER, key=lambda t: (counts[t] - quotas[t], TAG_ORDER.index(t))
    )
    for tag in remainders[:short]:
        counts[tag] += 1
    return counts


def _centroids(n_classes: int, dim: int, sep: float) -> np.ndarray:
    # pairwise centroid distance equals sep exactly
    scale = sep / math.sqrt(2.0)
    out = np.zeros((n_classes, dim))
    out[:, :n_classes] = scale * np.eye(n_classes)
    return out


def _softmax_probs(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=-1)
    logits = -d2
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return p


def _bias(sep: float) -> float:
    return min(_TARGET_LOG_ODDS / (2.0 * sep * sep), _MAX_BIAS)


def _ue_point(dim: int, sep: float) -> np.ndarray:
    shift = max(_UE_MIN_SHIFT, _UE_SHIFT_FACTOR * sep)
    return -(shift / math.sqrt(dim)) * np.ones(dim)


def generate_paired_dataset(cfg: SynthConfig) -> SynthResult:
    """Generate one paired LI/HI dataset with planted dynamic categories."""
    rng = np.random.default_rng(cfg.seed)
    counts = _category_counts(cfg)
    n = cfg.n_samples

    mu_li = _centroids(cfg.n_classes, cfg.d_li, cfg.sep_li)
    mu_hi = _centroids(cfg.n_classes, cfg.d_hi, cfg.sep_hi)
    bias_li = _bias(cfg.sep_li)
    bias_hi = _bias(cfg.sep_hi)

    tags = np.concatenate([np.full(counts[t], t, dtype="<U3") for t in TAG_ORDER])
    place_li = np.zeros((n, cfg.d_li))
    place_hi = np.zeros((n, cfg.d_hi))
    true_labels = np.zeros(n, dtype=np.int64)
    labels = np.zeros(n, dtype=np.int64)

    idx = 0
    y_c = rng.integers(0, cfg.n_classes, counts["C"])
    y_ue = rng.integers(0, cfg.n_classes, counts["UE"])

    block = slice(idx, idx + counts["C"])
    place_li[block] = mu_li[y_c]
    place_hi[block] = mu_hi[y_c]
    true_labels[block] = y_c
    labels[block] = y_c
    idx += counts["C"]

    a, b = _UAR_PAIR if cfg.n_classes >= 2 else (0, 0)
    block = slice(idx, idx + counts["UAR"])
    mid = 0.5 * (mu_li[a] + mu_li[b])
    place_li[block] = mid + bias_li * (mu_li[b] - mu_li[a])
    place_hi[block] = mu_hi[a]
    true_labels[block] = a
    labels[block] = a
    idx += counts["UAR"]

    a2, b2 = _UAI_PAIR if cfg.n_classes >= 4 else _UAR_PAIR
    block = slice(idx, idx + counts["UAI"])
    mid_li = 0.5 * (mu_li[a2] + mu_li[b2])
    mid_hi = 0.5 * (mu_hi[a2] + mu_hi[b2])
    place_li[block] = mid_li + bias_li * (mu_li[b2] - mu_li[a2])
    place_hi[block] = mid_hi + bias_hi * (mu_hi[b2] - mu_hi[a2])
    true_labels[block] = a2
    labels[block] = a2
    idx += counts["UAI"]

    block = slice(idx, idx + counts["UE"])
    place_li[block] = _ue_point(cfg.d_li, cfg.sep_li)
    place_hi[block] = mu_hi[y_ue]
    true_labels[block] = y_ue
    labels[block] = LABEL_MISSING
    idx += counts["UE"]

    probs_li = _softmax_probs(
        place_li + _PROB_JITTER * rng.standard_normal((n, cfg.d_li)), mu_li
    )
    probs_hi = _softmax_probs(
        place_hi + _PROB_JITTER * rng.standard_normal((n, cfg.d_hi)), mu_hi
    )
    li_noise_std = math.sqrt(1.0 + cfg.noise_li**2)
    feats_li = place_li + li_noise_std * rng.standard_normal((n, cfg.d_li))
    feats_hi = place_hi + rng.standard_normal((n, cfg.d_hi))

    perm = rng.permutation(n)
    li = FeatureSet(
        features=feats_li[perm], probs=probs_li[perm], labels=labels[perm], domain=DOMAIN_LI
    )
    hi = FeatureSet(
        features=feats_hi[perm], probs=probs_hi[perm], labels=labels[perm], domain=DOMAIN_HI
    )
    return SynthResult(li=li, hi=hi, planted_tags=tags[perm], true_labels=true_labels[perm])
