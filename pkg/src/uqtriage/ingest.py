"""Dense-map ingestion: grid construction, block-mean downscaling, and
LI-to-HI pairing by coordinate.

A grid is a FeatureSet whose records are stored row-major with height/width
set and per-record (row, col) coords. Downscaling replaces each factor x
factor block by its mean feature vector and mean probability vector
(renormalized back onto the simplex); labels take the block plurality (ties
to the smallest label), and blocks with no labeled member stay unlabeled.
When the factor does not divide the grid dims, the trailing partial rows and
columns are truncated.

Pairing aligns an LI grid with an HI grid whose dims are an integer multiple:
each LI cell is matched with the block-mean of the corresponding scale x
scale HI region, yielding two index-aligned sets of equal length.
"""

from __future__ import annotations

import numpy as np

from .core import LABEL_MISSING, FeatureSet
from .errors import ValidationError


def make_grid(features, probs, labels=None, domain: str = "LI") -> FeatureSet:
    """Build a row-major grid FeatureSet from (H, W, d) / (H, W, C) arrays."""
    f = np.asarray(features)
    p = np.asarray(probs)
    if f.ndim != 3 or p.ndim != 3 or f.shape[:2] != p.shape[:2]:
        raise ValidationError("expected (H, W, d) features and (H, W, C) probs")
    h, w = f.shape[:2]
    lab = None
    if labels is not None:
        lab = np.asarray(labels)
        if lab.shape != (h, w):
            raise ValidationError("labels must be (H, W)")
        lab = lab.reshape(-1)
    rows, cols = np.divmod(np.arange(h * w), w)
    return FeatureSet(
        features=f.reshape(h * w, -1),
        probs=p.reshape(h * w, -1),
        labels=lab,
        coords=np.stack([rows, cols], axis=1),
        domain=domain,
        height=h,
        width=w,
    )


def validate_grid(grid: FeatureSet) -> None:
    """Check grid structure: dims set, coords unique, in-bounds, row-major."""
    if not grid.is_grid:
        raise ValidationError("not a grid: height/width unset")
    if grid.coords is None:
        raise ValidationError("grid records must carry coords")
    h, w = grid.height, grid.width
    rows, cols = grid.coords[:, 0], grid.coords[:, 1]
    if np.any(rows >= h) or np.any(cols >= w):
        raise ValidationError("coords out of grid bounds")
    flat = rows * w + cols
    if np.unique(flat).size != len(grid):
        raise ValidationError("grid coords must be unique")
    if np.any(flat != np.arange(len(grid))):
        raise ValidationError("grid records must be stored row-major")


def _block_view(arr: np.ndarray, factor: int, h_out: int, w_out: int) -> np.ndarray:
    trimmed = arr[: h_out * factor, : w_out * factor]
    return trimmed.reshape(h_out, factor, w_out, factor, -1)


def _plurality_labels(labels: np.ndarray, factor: int, h_out: int, w_out: int) -> np.ndarray:
    blocks = _block_view(labels[:, :, None], factor, h_out, w_out)[..., 0]
    out = np.full(h_out * w_out, LABEL_MISSING, dtype=np.int64)
    flat = blocks.transpose(0, 2, 1, 3).reshape(h_out * w_out, factor * factor)
    for i, block in enumerate(flat):
        present = block[block != LABEL_MISSING]
        if present.size:
            vals, counts = np.unique(present, return_counts=True)
            out[i] = vals[np.argmax(counts)]  # unique() sorts: ties -> smallest
    return out


def downscale_grid(grid: FeatureSet, factor: int) -> FeatureSet:
    """Block-mean downscale; probabilities are renormalized after averaging."""
    validate_grid(grid)
    if factor <= 0:
        raise ValidationError(f"factor must be positive, got {factor}")
    if factor == 1:
        return grid
    h_out, w_out = grid.height // factor, grid.width // factor
    if h_out == 0 or w_out == 0:
        raise ValidationError(f"factor {factor} exceeds grid dims {grid.height}x{grid.width}")

    feats = grid.features.reshape(grid.height, grid.width, -1)
    probs = grid.probs.reshape(grid.height, grid.width, -1).astype(np.float64)
    f_out = _block_view(feats, factor, h_out, w_out).mean(axis=(1, 3))
    p_out = _block_view(probs, factor, h_out, w_out).mean(axis=(1, 3))
    p_out /= p_out.sum(axis=-1, keepdims=True)

    labels = None
    if grid.labels is not None:
        labels = _plurality_labels(
            grid.labels.reshape(grid.height, grid.width), factor, h_out, w_out
        ).reshape(h_out, w_out)
    return make_grid(f_out, p_out, labels, domain=grid.domain)


def pair_grids(li: FeatureSet, hi: FeatureSet, scale: int) -> tuple[FeatureSet, FeatureSet]:
    """Pair every LI cell with the aggregated HI block at its location.

    Returns index-aligned (li, hi_aggregated) sets of equal length; the i-th
    records of both are one LI/HI pair.
    """
    validate_grid(li)
    validate_grid(hi)
    if scale <= 0:
        raise ValidationError(f"scale must be positive, got {scale}")
    if hi.height != scale * li.height or hi.width != scale * li.width:
        raise ValidationError(
            f"HI dims {hi.height}x{hi.width} are not {scale}x the LI dims "
            f"{li.height}x{li.width}"
        )
    hi_small = downscale_grid(hi, scale) if scale > 1 else hi
    return li, hi_small
