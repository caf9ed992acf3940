import numpy as np
import pytest

from uqtriage.core import FeatureSet


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_feature_set(
    rng, n=50, d=8, n_classes=4, domain="LI", labels=True, coords=False, grid=None
):
    """Small random FeatureSet with float32 storage, as an FDMP file would hold."""
    features = rng.standard_normal((n, d)).astype(np.float32)
    probs = rng.random((n, n_classes)).astype(np.float64)
    probs /= probs.sum(axis=1, keepdims=True)
    probs = probs.astype(np.float32)
    lab = rng.integers(0, n_classes, n) if labels else None
    height = width = 0
    crd = None
    if grid is not None:
        height, width = grid
        assert height * width == n
        rows, cols = np.divmod(np.arange(n), width)
        crd = np.stack([rows, cols], axis=1)
    elif coords:
        crd = np.stack([np.arange(n), np.zeros(n, dtype=int)], axis=1)
    return FeatureSet(
        features=features,
        probs=probs,
        labels=lab,
        coords=crd,
        domain=domain,
        height=height,
        width=width,
    )
