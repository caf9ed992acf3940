"""Latent-space distance backends used for epistemic scoring and prototypes.

Two interchangeable backends over a fitted calibration subset:

* Mahalanobis-to-nearest-centroid: per-group means with a single covariance
  pooled across groups (class-conditional centering), regularized as
  Sigma + lambda * (trace(Sigma)/d) * I and inverted. The reported score is
  the square root of the quadratic form, i.e. a metric:

      score(z) = min_g sqrt((z - mu_g)^T Sigma^-1 (z - mu_g))

* k-th nearest neighbor: exact Euclidean distance to the k-th closest stored
  point (full scan, no approximation).

An optional PCA projector can reduce dimensionality before either distance.
Banks are immutable once fitted; scoring is read-only and chunked so batches
of any size run in bounded memory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError

DEFAULT_SHRINKAGE = 1e-3
_CHUNK_ROWS = 65536
_KNN_CHUNK_ROWS = 256


def _as_matrix(features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise ValidationError(f"expected a non-empty (n, d) feature matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("features contain non-finite entries")
    return x


@dataclass
class GaussianBank:
    """Per-group centroids plus the inverse of one shared regularized covariance."""

    means: np.ndarray            # (G, d)
    cov_inv: np.ndarray          # (d, d), SPD
    group_ids: np.ndarray        # (G,) sorted ascending
    shrinkage: float = DEFAULT_SHRINKAGE
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.cov_inv = np.asarray(self.cov_inv, dtype=np.float64)
        self.group_ids = np.asarray(self.group_ids)
        if self.means.shape[0] != self.group_ids.shape[0]:
            raise ValidationError("one group id per centroid required")
        d = self.means.shape[1]
        if self.cov_inv.shape != (d, d):
            raise ValidationError("cov_inv shape must match feature dimension")
        asym = np.max(np.abs(self.cov_inv - self.cov_inv.T))
        scale = max(1.0, float(np.max(np.abs(self.cov_inv))))
        if asym > 1e-8 * scale:
            raise ValidationError(f"cov_inv is not symmetric (max asymmetry {asym:.3g})")
        try:
            # lower-triangular L with cov_inv = L L^T; scores become exact
            # sums of squares |L^T (z - mu)|^2
            self._chol = np.linalg.cholesky(self.cov_inv)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("inverse covariance is not positive definite") from exc

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_groups(self) -> int:
        return self.means.shape[0]


def fit_gaussian_bank(features, groups, shrinkage: float = DEFAULT_SHRINKAGE) -> GaussianBank:
    """Fit per-group means and a pooled, shrunk, inverted covariance.

    The covariance pools class-conditionally centered deviations across all
    groups (denominator n, population convention), then adds
    shrinkage * (trace/d) * I before inversion; a trace of zero (all groups
    degenerate point masses) falls back to unit scale so the regularizer
    never vanishes. Non-SPD results are rejected explicitly.
    """
    x = _as_matrix(features)
    g = np.asarray(groups)
    if g.shape != (x.shape[0],):
        raise ValidationError("groups must supply one id per record")
    if not (0.0 <= shrinkage < 1.0):
        raise ValidationError(f"shrinkage must lie in [0, 1), got {shrinkage}")
    ids, inv = np.unique(g, return_inverse=True)
    n, d = x.shape
    counts = np.bincount(inv, minlength=ids.size)
    if np.any(counts < 2):
        small = ids[counts < 2]
        raise ValidationError(f"every group needs >= 2 members; too small: {small.tolist()}")

    means = np.zeros((ids.size, d))
    np.add.at(means, inv, x)
    means /= counts[:, None]

    centered = x - means[inv]
    cov = centered.T @ centered / n

    trace = float(np.trace(cov))
    scale = trace / d if trace > 0.0 else 1.0
    cov_reg = cov + shrinkage * scale * np.eye(d)
    try:
        np.linalg.cholesky(cov_reg)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("regularized covariance is not positive definite") from exc
    cov_inv = np.linalg.inv(cov_reg)
    cov_inv = 0.5 * (cov_inv + cov_inv.T)
    return GaussianBank(means=means, cov_inv=cov_inv, group_ids=ids, shrinkage=shrinkage)


def mahalanobis_scores(features, bank: GaussianBank) -> tuple[np.ndarray, np.ndarray]:
    """Distance to the nearest centroid for a batch of vectors.

    Returns (scores, nearest_group_ids); ties resolve to the lowest group id
    because group ids are kept sorted and argmin takes the first minimum.
    """
    z = _as_matrix(features)
    if z.shape[1] != bank.dim:
        raise ValidationError(f"dimension mismatch: got {z.shape[1]}, bank has {bank.dim}")
    n = z.shape[0]
    q = np.empty((n, bank.n_groups))
    for start in range(0, n, _CHUNK_ROWS):
        stop = min(start + _CHUNK_ROWS, n)
        block = z[start:stop]
        for gi in range(bank.n_groups):
            delta = block - bank.means[gi]
            v = delta @ bank._chol
            q[start:stop, gi] = np.einsum("ij,ij->i", v, v)
    nearest = np.argmin(q, axis=1)
    scores = np.sqrt(q[np.arange(n), nearest])
    return scores, bank.group_ids[nearest]


def mahalanobis_score(z, bank: GaussianBank) -> tuple[float, object]:
    """Single-vector convenience wrapper around `mahalanobis_scores`."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise ValidationError("expected a 1-D vector")
    scores, nearest = mahalanobis_scores(z[None, :], bank)
    gid = nearest[0]
    return float(scores[0]), gid.item() if hasattr(gid, "item") else gid


@dataclass
class NeighborBank:
    """Stored calibration points for exact k-th nearest neighbor distances."""

    points: np.ndarray   # (n_v, d)
    k: int
    normalize: bool = False

    def __post_init__(self):
        self.points = _as_matrix(self.points)
        if not (1 <= self.k <= self.points.shape[0]):
            raise ValidationError(f"k={self.k} must lie in [1, {self.points.shape[0]}]")

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValidationError("cannot unit-normalize a zero vector")
    return x / norms


def fit_neighbor_bank(features, k: int, normalize: bool = False) -> NeighborBank:
    """Store calibration vectors (optionally unit-normalized) for KNN scoring."""
    x = _as_matrix(features)
    if normalize:
        x = _unit_rows(x)
    return NeighborBank(points=x, k=int(k), normalize=normalize)


def knn_scores(features, bank: NeighborBank) -> np.ndarray:
    """Exact Euclidean distance to the k-th nearest stored point, per query."""
    z = _as_matrix(features)
    if z.shape[1] != bank.dim:
        raise ValidationError(f"dimension mismatch: got {z.shape[1]}, bank has {bank.dim}")
    if bank.normalize:
        z = _unit_rows(z)
    n = z.shape[0]
    out = np.empty(n)
    for start in range(0, n, _KNN_CHUNK_ROWS):
        stop = min(start + _KNN_CHUNK_ROWS, n)
        diff = z[start:stop, None, :] - bank.points[None, :, :]
        dists = np.sqrt((diff * diff).sum(axis=-1))
        out[start:stop] = np.partition(dists, bank.k - 1, axis=1)[:, bank.k - 1]
    return out


def knn_score(z, bank: NeighborBank) -> float:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise ValidationError("expected a 1-D vector")
    return float(knn_scores(z[None, :], bank)[0])


@dataclass
class PcaProjector:
    """Affine projection onto the top principal directions of a fitted set."""

    mean: np.ndarray        # (d,)
    components: np.ndarray  # (m, d), orthonormal rows

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.components = np.atleast_2d(np.asarray(self.components, dtype=np.float64))
        m, d = self.components.shape
        if self.mean.shape != (d,) or m > d:
            raise ValidationError("components must be (m, d) with m <= d and a matching mean")
        gram = self.components @ self.components.T
        if np.max(np.abs(gram - np.eye(m))) > 1e-6:
            raise ValidationError("component rows must be orthonormal within 1e-6")

    @property
    def out_dim(self) -> int:
        return self.components.shape[0]

    def project(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.mean.shape[0]:
            raise ValidationError("dimension mismatch in projection")
        y = (x - self.mean) @ self.components.T
        return y[0] if single else y


def fit_pca(features, m: int) -> PcaProjector:
    """Top-m eigenvectors of the sample covariance, sorted by descending eigenvalue."""
    x = _as_matrix(features)
    n, d = x.shape
    if n < 2:
        raise ValidationError("need at least 2 records to fit a projection")
    if not (1 <= m <= d):
        raise ValidationError(f"m={m} must lie in [1, d={d}]")
    mean = x.mean(axis=0)
    cov = np.cov(x, rowvar=False, bias=False).reshape(d, d)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:m]
    return PcaProjector(mean=mean, components=eigvecs[:, order].T)
