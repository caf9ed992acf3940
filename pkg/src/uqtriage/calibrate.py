"""Calibration-subset sampling and threshold selection.

The calibration subset is drawn with proportional stratified allocation
(largest-remainder rounding) over (class, group) strata, so every populated
stratum keeps representation even at small target sizes.

tau_EU is the ceil(tpr * n)-th order statistic of the calibration EU scores:
the fraction of calibration samples strictly below it is within 1/n of the
requested true-positive rate. tau_AU is chosen by exhaustive sweep over the
observed entropy values (the objective is a step function, so no grid is
needed), maximizing the number of records that end up simultaneously accurate
and certain; ties resolve to the smallest candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import FeatureSet
from .errors import ValidationError


@dataclass
class CalibrationSet:
    """Indices of the drawn records plus the stratum key of each."""

    indices: np.ndarray          # (m,) indices into the source set, ascending
    strata: list                 # stratum key per drawn record, parallel to indices

    def __len__(self) -> int:
        return self.indices.shape[0]


def _allocate_largest_remainder(counts: np.ndarray, target: int) -> np.ndarray:
    """Proportional seats for each stratum; exact total, every stratum >= 1."""
    n = int(counts.sum())
    quotas = target * counts / n
    alloc = np.floor(quotas).astype(np.int64)
    remainder = target - int(alloc.sum())
    if remainder > 0:
        # stable order: largest fractional part first, earlier stratum on ties
        frac = quotas - alloc
        order = np.lexsort((np.arange(counts.size), -frac))
        alloc[order[:remainder]] += 1
    # representation repair: move single seats from the largest allocations
    while True:
        starved = np.flatnonzero((alloc == 0) & (counts > 0))
        if starved.size == 0:
            break
        donor = int(np.argmax(alloc))
        if alloc[donor] <= 1:
            raise ValidationError(
                f"target size {target} too small to represent all {counts.size} strata"
            )
        alloc[donor] -= 1
        alloc[starved[0]] += 1
    alloc = np.minimum(alloc, counts)
    return alloc


def sample_calibration_set(
    records: FeatureSet, target_size: int, seed: int, groups=None
) -> CalibrationSet:
    """Draw a stratified calibration subset, deterministic given the seed.

    Strata are (label, group) pairs; `groups` defaults to a single shared
    group (no core-level structure). Unlabeled records form their own
    (None, group) stratum.
    """
    n = len(records)
    if n == 0:
        raise ValidationError("cannot sample from an empty record set")
    if not (1 <= target_size <= n):
        raise ValidationError(f"target_size must lie in [1, {n}], got {target_size}")
    if groups is None:
        groups = np.zeros(n, dtype=np.int64)
    groups = np.asarray(groups)
    if groups.shape != (n,):
        raise ValidationError("groups must supply one id per record")

    labels = records.labels
    keys = []
    for i in range(n):
        lab = None
        if labels is not None and labels[i] >= 0:
            lab = int(labels[i])
        keys.append((lab, groups[i].item() if hasattr(groups[i], "item") else groups[i]))

    strata = sorted(set(keys), key=lambda k: (k[0] is None, k[0], str(k[1])))
    members = {s: [] for s in strata}
    for i, k in enumerate(keys):
        members[k].append(i)
    counts = np.array([len(members[s]) for s in strata], dtype=np.int64)

    alloc = _allocate_largest_remainder(counts, target_size)
    rng = np.random.default_rng(seed)
    chosen = []
    for s, m in zip(strata, alloc):
        pool = np.array(members[s], dtype=np.int64)
        take = rng.choice(pool, size=int(m), replace=False) if m < pool.size else pool
        chosen.append(np.sort(take))
    indices = np.sort(np.concatenate(chosen))
    key_of = dict(zip(range(n), keys))
    return CalibrationSet(indices=indices, strata=[key_of[int(i)] for i in indices])


def calibrate_tau_eu(eu_scores, tpr: float) -> float:
    """EU threshold at the requested calibration true-positive rate.

    Returns the ceil(tpr * n)-th order statistic (no interpolation), matching
    the per-sample counting convention of OOD detection protocols.
    """
    scores = np.asarray(eu_scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ValidationError("eu_scores must be a non-empty 1-D array")
    if not np.all(np.isfinite(scores)):
        raise ValidationError("eu_scores must be finite")
    if not (0.0 < tpr < 1.0):
        raise ValidationError(f"tpr must lie in (0, 1), got {tpr}")
    k = math.ceil(tpr * scores.size)
    return float(np.sort(scores)[k - 1])


def calibrate_tau_au(
    entropies, accurate, eu_scores, tau_eu: float, n_classes: int
) -> float:
    """AU threshold maximizing the count of accurate-and-certain records.

    Candidates are the distinct entropy values of low-EU records plus ln C.
    The objective #(accurate and eu < tau_EU and entropy < tau) is a
    non-decreasing step function of tau; ties resolve to the smallest
    candidate, i.e. the first one admitting every accurate low-EU record that
    any candidate can admit.
    """
    h = np.asarray(entropies, dtype=np.float64)
    acc = np.asarray(accurate, dtype=bool)
    eu = np.asarray(eu_scores, dtype=np.float64)
    if not (h.shape == acc.shape == eu.shape) or h.ndim != 1:
        raise ValidationError("entropies, accurate, eu_scores must be matching 1-D arrays")
    if n_classes < 2:
        raise ValidationError("need at least two classes")
    low = eu < tau_eu
    if not np.any(low):
        raise ValidationError("no low-EU records: calibration set unusable for tau_AU")

    candidates = np.unique(np.concatenate([h[low], [math.log(n_classes)]]))
    h_acc = np.sort(h[low & acc])
    objective = np.searchsorted(h_acc, candidates, side="left")
    best = int(np.flatnonzero(objective == objective.max())[0])
    return float(candidates[best])
