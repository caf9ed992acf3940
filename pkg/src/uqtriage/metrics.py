"""Evaluation metrics: macro F1, ECE, P(accurate, certain), Kendall tau-b,
calibration-coverage AUC, and budget-sweep integrals.

ECE uses equal-width, right-closed bins over the max-probability confidence;
empty bins are skipped. The calibration-coverage curve abstains on the
highest-EU samples: at coverage c the floor(c*n) lowest-EU samples set an EU
threshold and every sample at or below it is retained (so a constant EU score
retains everything and the curve is flat at the full-set ECE). Curve and
budget integrals are trapezoidal, normalized by the span so a constant curve
integrates to its own value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .core import SIMPLEX_ATOL_F32, TAG_CERTAIN, check_simplex
from .errors import ValidationError

DEFAULT_ECE_BINS = 15
# 19 interior coverages plus full coverage
DEFAULT_COVERAGE_GRID = tuple(np.round(np.arange(1, 20) * 0.05, 2)) + (1.0,)


def _check_labels(labels, n_classes: int, name: str) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1:
        raise ValidationError(f"{name} must be 1-D")
    if y.size and (np.any(y < 0) or np.any(y >= n_classes)):
        raise ValidationError(f"{name} outside [0, {n_classes})")
    return y.astype(np.int64)


def macro_f1(pred_labels, true_labels, n_classes: int) -> tuple[float, np.ndarray]:
    """Unweighted mean of per-class one-vs-rest F1.

    Classes absent from both predictions and truth are excluded from the mean
    (their per-class entry is NaN); classes appearing on either side count,
    scoring 0 when they have no true positive.
    """
    pred = _check_labels(pred_labels, n_classes, "pred_labels")
    true = _check_labels(true_labels, n_classes, "true_labels")
    if pred.shape != true.shape:
        raise ValidationError("pred_labels and true_labels must match in length")
    per_class = np.full(n_classes, np.nan)
    for c in range(n_classes):
        p = pred == c
        t = true == c
        if not (p.any() or t.any()):
            continue
        tp = int(np.sum(p & t))
        denom = 2 * tp + int(np.sum(p & ~t)) + int(np.sum(~p & t))
        per_class[c] = 2 * tp / denom if denom else 0.0
    included = ~np.isnan(per_class)
    if not included.any():
        raise ValidationError("no class has support in predictions or truth")
    return float(per_class[included].mean()), per_class


def _bin_index(confidence: np.ndarray, n_bins: int) -> np.ndarray:
    # right-closed bins ((i-1)/B, i/B]; confidence of exactly i/B lands in bin i
    idx = np.ceil(confidence * n_bins).astype(np.int64) - 1
    return np.clip(idx, 0, n_bins - 1)


def ece(probs, true_labels, n_bins: int = DEFAULT_ECE_BINS, atol: float = SIMPLEX_ATOL_F32) -> float:
    """Expected calibration error over max-probability confidence bins."""
    p = check_simplex(probs, atol=atol)
    if p.ndim != 2:
        raise ValidationError("probs must be an (n, C) array")
    if n_bins < 1:
        raise ValidationError(f"n_bins must be >= 1, got {n_bins}")
    true = _check_labels(true_labels, p.shape[1], "true_labels")
    if true.shape[0] != p.shape[0]:
        raise ValidationError("probs and true_labels must match in length")
    n = p.shape[0]
    if n == 0:
        raise ValidationError("cannot compute ECE on an empty set")
    conf = p.max(axis=1)
    correct = (p.argmax(axis=1) == true).astype(np.float64)
    bins = _bin_index(conf, n_bins)
    total = 0.0
    for b in np.unique(bins):
        members = bins == b
        m = int(members.sum())
        total += (m / n) * abs(correct[members].mean() - conf[members].mean())
    return float(total)


def p_accurate_certain(pred_labels, true_labels, tags) -> float:
    """Fraction of all samples that are both accurate and tagged certain."""
    pred = np.asarray(pred_labels)
    true = np.asarray(true_labels)
    t = np.asarray(tags)
    if not (pred.shape == true.shape == t.shape) or pred.ndim != 1:
        raise ValidationError("pred_labels, true_labels, tags must be matching 1-D arrays")
    if pred.size == 0:
        raise ValidationError("cannot compute P(accurate, certain) on an empty set")
    return float(np.mean((pred == true) & (t == TAG_CERTAIN)))


def kendall_tau(x_scores, y_scores) -> float:
    """Tie-corrected Kendall tau-b rank correlation."""
    x = np.asarray(x_scores, dtype=np.float64)
    y = np.asarray(y_scores, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValidationError("need two matching 1-D arrays of length >= 2")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValidationError("correlation undefined: one input is entirely tied")
    tau = stats.kendalltau(x, y, variant="b").statistic
    return float(tau)


def aucc(
    probs,
    true_labels,
    eu_scores,
    coverage_grid: Sequence[float] = DEFAULT_COVERAGE_GRID,
    n_bins: int = DEFAULT_ECE_BINS,
) -> tuple[float, list[tuple[float, float]]]:
    """Area under the calibration-coverage curve (lower is better).

    For each coverage c the floor(c*n) lowest-EU samples define the retention
    threshold; ECE is computed on everything at or below it. Returns the
    normalized trapezoidal area and the (coverage, ECE) points used.
    """
    p = check_simplex(probs, atol=SIMPLEX_ATOL_F32)
    eu = np.asarray(eu_scores, dtype=np.float64)
    true = np.asarray(true_labels)
    n = p.shape[0]
    if eu.shape != (n,) or true.shape != (n,):
        raise ValidationError("probs, true_labels, eu_scores must match in length")
    grid = sorted(set(float(c) for c in coverage_grid))
    if not grid or grid[0] <= 0.0 or grid[-1] > 1.0:
        raise ValidationError("coverage grid must lie in (0, 1]")
    sorted_eu = np.sort(eu)
    points = []
    for c in grid:
        m = int(np.floor(c * n))
        if m == 0:
            continue  # nothing retained at this coverage
        retained = eu <= sorted_eu[m - 1]
        points.append((c, ece(p[retained], true[retained], n_bins=n_bins)))
    if len(points) < 2:
        raise ValidationError("need at least two usable coverage points")
    xs = np.array([c for c, _ in points])
    ys = np.array([e for _, e in points])
    area = float(np.trapezoid(ys, xs) / (xs[-1] - xs[0]))
    return area, points


def budget_auc(curve: Sequence[tuple[float, float]]) -> float:
    """Normalized trapezoidal integral of a (budget, metric) curve."""
    pts = list(curve)
    if len(pts) < 2:
        raise ValidationError("need at least two curve points")
    xs = np.asarray([x for x, _ in pts], dtype=np.float64)
    ys = np.asarray([y for _, y in pts], dtype=np.float64)
    if np.any(np.diff(xs) <= 0):
        raise ValidationError("budgets must be strictly increasing")
    return float(np.trapezoid(ys, xs) / (xs[-1] - xs[0]))


@dataclass
class EvalReport:
    """Metric bundle for one evaluation pass."""

    macro_f1: float
    ece: float
    p_accurate_certain: float
    kendall_tau: Optional[float] = None
    aucc: Optional[float] = None
    per_class_f1: Optional[np.ndarray] = None
    curve_points: Optional[list[tuple[float, float]]] = None

    def to_dict(self) -> dict:
        """JSON-ready dict; Tab-style percent values alongside natural units."""
        out = {
            "f1": self.macro_f1,
            "ece": self.ece,
            "pac": self.p_accurate_certain,
            "tau": self.kendall_tau,
            "aucc": self.aucc,
            "f1_pct": 100.0 * self.macro_f1,
            "ece_pct": 100.0 * self.ece,
            "pac_pct": 100.0 * self.p_accurate_certain,
            "tau_pct": None if self.kendall_tau is None else 100.0 * self.kendall_tau,
        }
        if self.per_class_f1 is not None:
            out["per_class_f1"] = [None if np.isnan(v) else float(v) for v in self.per_class_f1]
        if self.curve_points is not None:
            out["calibration_coverage_curve"] = [[c, e] for c, e in self.curve_points]
        return out
