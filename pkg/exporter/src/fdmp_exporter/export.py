"""Turn dense model outputs (feature map + softmax map) into FDMP dumps.

The usual source is a segmentation network's final feature map hooked out of
a forward pass and saved as arrays: features (H, W, d), probs (H, W, C), and
optionally labels (H, W) with -1 marking unlabeled pixels. Downscaling
averages factor x factor blocks (features and probs; probs renormalized,
labels by block plurality with ties to the smallest), truncating partial edge
blocks, and matches the consumer-side grid aggregation to float precision.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .format import write_fdmp

log = logging.getLogger("fdmp_exporter")

# row sums within PROB_TOLERANCE renormalize silently; up to PROB_REJECT they
# renormalize with a warning; anything worse is not a probability map
PROB_TOLERANCE = 1e-4
PROB_REJECT = 1e-2


class ExportError(ValueError):
    """Invalid arrays or an inconsistent export request."""


@dataclass
class ExportSpec:
    """One export request: source arrays, domain tag, downscale, destination."""

    features: np.ndarray            # (H, W, d)
    probs: np.ndarray               # (H, W, C)
    labels: np.ndarray | None = None  # (H, W), -1 = unlabeled
    domain: str = "LI"
    factor: int = 1
    out_path: str = "out.fdmp"

    def validate(self) -> None:
        f = np.asarray(self.features)
        p = np.asarray(self.probs)
        if f.ndim != 3 or p.ndim != 3:
            raise ExportError("features and probs must be (H, W, d) / (H, W, C) arrays")
        if f.shape[:2] != p.shape[:2]:
            raise ExportError(f"grid shape mismatch: {f.shape[:2]} vs {p.shape[:2]}")
        if p.shape[2] < 2:
            raise ExportError("need at least two classes")
        if self.labels is not None and np.asarray(self.labels).shape != f.shape[:2]:
            raise ExportError("labels must be (H, W)")
        if not np.all(np.isfinite(f)):
            raise ExportError("features contain non-finite values")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ExportError("probs must be finite and non-negative")
        if self.domain not in ("LI", "HI"):
            raise ExportError(f"domain must be LI or HI, got {self.domain!r}")
        if self.factor < 1:
            raise ExportError(f"downscale factor must be positive, got {self.factor}")
        if min(f.shape[0], f.shape[1]) // self.factor == 0:
            raise ExportError(f"factor {self.factor} exceeds grid dims {f.shape[:2]}")


def _renormalize(probs: np.ndarray) -> np.ndarray:
    sums = probs.sum(axis=-1)
    worst = float(np.max(np.abs(sums - 1.0)))
    if worst > PROB_REJECT:
        raise ExportError(f"probability rows off the simplex by {worst:.3g} (> {PROB_REJECT:g})")
    if worst > PROB_TOLERANCE:
        log.warning("renormalizing probability rows (worst deviation %.3g)", worst)
    return probs / sums[..., None]


def _block_mean(arr: np.ndarray, factor: int) -> np.ndarray:
    h, w = arr.shape[:2]
    ho, wo = h // factor, w // factor
    trimmed = arr[: ho * factor, : wo * factor]
    return trimmed.reshape(ho, factor, wo, factor, -1).mean(axis=(1, 3))


def _block_plurality(labels: np.ndarray, factor: int) -> np.ndarray:
    h, w = labels.shape
    ho, wo = h // factor, w // factor
    trimmed = labels[: ho * factor, : wo * factor]
    blocks = trimmed.reshape(ho, factor, wo, factor).transpose(0, 2, 1, 3).reshape(ho, wo, -1)
    out = np.full((ho, wo), -1, dtype=np.int64)
    for i in range(ho):
        for j in range(wo):
            present = blocks[i, j][blocks[i, j] >= 0]
            if present.size:
                vals, counts = np.unique(present, return_counts=True)
                out[i, j] = vals[np.argmax(counts)]
    return out


def export(spec: ExportSpec) -> str:
    """Validate, optionally downscale, and write the FDMP file."""
    spec.validate()
    feats = np.asarray(spec.features, dtype=np.float64)
    probs = _renormalize(np.asarray(spec.probs, dtype=np.float64))
    labels = None if spec.labels is None else np.asarray(spec.labels, dtype=np.int64)

    if spec.factor > 1:
        feats = _block_mean(feats, spec.factor)
        probs = _renormalize(_block_mean(probs, spec.factor))
        if labels is not None:
            labels = _block_plurality(labels, spec.factor)

    h, w = feats.shape[:2]
    write_fdmp(
        spec.out_path,
        feats.reshape(h * w, -1),
        probs.reshape(h * w, -1),
        None if labels is None else labels.reshape(-1),
        domain=spec.domain,
        height=h,
        width=w,
    )
    log.info("wrote %dx%d %s grid to %s", h, w, spec.domain, spec.out_path)
    return spec.out_path


def load_container(path) -> dict:
    """Read the documented .npz container: features, probs, optional labels."""
    with np.load(path) as data:
        if "features" not in data or "probs" not in data:
            raise ExportError("container must hold 'features' and 'probs' arrays")
        out = {"features": data["features"], "probs": data["probs"]}
        if "labels" in data:
            out["labels"] = data["labels"]
    return out
