import numpy as np
import pytest

from uqtriage.artifacts import RunConfig
from uqtriage.core import LABEL_MISSING
from uqtriage.errors import (
    BadMagicError,
    MissingFieldError,
    TruncatedFileError,
    VersionMismatchError,
)
from uqtriage.fdmp import read_fdbk, read_fdmp, require_labels, write_fdbk, write_fdmp
from uqtriage.pipeline import apply_taxonomy, fit_model
from uqtriage.synth import SynthConfig, generate_paired_dataset

from conftest import random_feature_set


class TestFdmpRoundTrip:
    @pytest.mark.parametrize("labels,coords", [(True, True), (True, False), (False, False)])
    def test_bitwise_round_trip(self, rng, tmp_path, labels, coords):
        fs = random_feature_set(rng, n=64, d=5, n_classes=3, labels=labels, coords=coords)
        path_a = tmp_path / "a.fdmp"
        path_b = tmp_path / "b.fdmp"
        write_fdmp(fs, path_a)
        back = read_fdmp(path_a)
        write_fdmp(back, path_b)
        assert path_a.read_bytes() == path_b.read_bytes()
        np.testing.assert_array_equal(back.features, fs.features)
        np.testing.assert_array_equal(back.probs, fs.probs)

    def test_grid_dims_and_domain_preserved(self, rng, tmp_path):
        fs = random_feature_set(rng, n=12, d=4, n_classes=3, grid=(3, 4), domain="HI")
        path = tmp_path / "g.fdmp"
        write_fdmp(fs, path)
        back = read_fdmp(path)
        assert (back.height, back.width) == (3, 4)
        assert back.domain == "HI"
        np.testing.assert_array_equal(back.coords, fs.coords)

    def test_missing_label_sentinel_round_trips(self, rng, tmp_path):
        fs = random_feature_set(rng, n=10, d=3, n_classes=3)
        fs.labels[4] = LABEL_MISSING
        path = tmp_path / "s.fdmp"
        write_fdmp(fs, path)
        back = read_fdmp(path)
        assert back.labels[4] == LABEL_MISSING
        assert back.labels[0] == fs.labels[0]


class TestFdmpErrors:
    def write_sample(self, rng, tmp_path):
        fs = random_feature_set(rng, n=16, d=4, n_classes=3)
        path = tmp_path / "x.fdmp"
        write_fdmp(fs, path)
        return path

    def test_truncated_payload_rejected(self, rng, tmp_path):
        path = self.write_sample(rng, tmp_path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(TruncatedFileError):
            read_fdmp(path)

    def test_truncated_header_rejected(self, rng, tmp_path):
        path = self.write_sample(rng, tmp_path)
        path.write_bytes(path.read_bytes()[:10])
        with pytest.raises(TruncatedFileError):
            read_fdmp(path)

    def test_trailing_garbage_rejected(self, rng, tmp_path):
        path = self.write_sample(rng, tmp_path)
        path.write_bytes(path.read_bytes() + b"junk")
        with pytest.raises(TruncatedFileError):
            read_fdmp(path)

    def test_bad_magic_rejected(self, rng, tmp_path):
        path = self.write_sample(rng, tmp_path)
        data = bytearray(path.read_bytes())
        data[:4] = b"NOPE"
        path.write_bytes(bytes(data))
        with pytest.raises(BadMagicError):
            read_fdmp(path)

    def test_version_mismatch_rejected(self, rng, tmp_path):
        path = self.write_sample(rng, tmp_path)
        data = bytearray(path.read_bytes())
        data[4:6] = (99).to_bytes(2, "little")
        path.write_bytes(bytes(data))
        with pytest.raises(VersionMismatchError):
            read_fdmp(path)

    def test_labels_absent_error(self, rng, tmp_path):
        fs = random_feature_set(rng, n=8, d=3, n_classes=3, labels=False)
        path = tmp_path / "nolabel.fdmp"
        write_fdmp(fs, path)
        back = read_fdmp(path)
        with pytest.raises(MissingFieldError):
            require_labels(back)


class TestFdbk:
    def test_fitted_model_round_trips(self, tmp_path):
        res = generate_paired_dataset(SynthConfig(n_samples=3000, seed=13))
        cfg = RunConfig(calib_size=1500)
        model = fit_model(res.li, res.hi, cfg)
        path = tmp_path / "banks.bin"
        write_fdbk(model, path)
        back = read_fdbk(path)
        assert back.backend == model.backend
        assert back.li_thresholds == model.li_thresholds
        assert back.hi_thresholds == model.hi_thresholds
        np.testing.assert_array_equal(back.li_eu_bank.means, model.li_eu_bank.means)
        np.testing.assert_array_equal(back.li_eu_bank.cov_inv, model.li_eu_bank.cov_inv)
        # behavioral equality: identical taxonomy from the deserialized model
        t1 = apply_taxonomy(model, res.li)
        t2 = apply_taxonomy(back, res.li)
        np.testing.assert_array_equal(t1.dyn_tags, t2.dyn_tags)
        np.testing.assert_allclose(t1.rank, t2.rank, equal_nan=True)

    def test_knn_and_pca_variant_round_trips(self, tmp_path):
        res = generate_paired_dataset(SynthConfig(n_samples=3000, seed=14))
        cfg = RunConfig(backend="knn", k=25, pca_dims=2, calib_size=1500)
        model = fit_model(res.li, res.hi, cfg)
        path = tmp_path / "banks_knn.bin"
        write_fdbk(model, path)
        back = read_fdbk(path)
        assert back.backend == "knn"
        assert back.resolvability.projector is not None
        np.testing.assert_array_equal(
            back.resolvability.projector.components,
            model.resolvability.projector.components,
        )
        assert back.resolvability.bank_uar.k == model.resolvability.bank_uar.k
        t1 = apply_taxonomy(model, res.li)
        t2 = apply_taxonomy(back, res.li)
        np.testing.assert_array_equal(t1.dyn_tags, t2.dyn_tags)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"WRONG" + b"\x00" * 64)
        with pytest.raises(BadMagicError):
            read_fdbk(path)
