import numpy as np
import pytest

from ipsae import linalg, model
from ipsae.data import SyntheticConfig, ZslDataset, generate_synthetic, sample_attributes_for
from ipsae.errors import (
    DimensionMismatch,
    FormatError,
    MissingFile,
    NonPositiveLambda,
    UnseenLabelInTraining,
)
from ipsae.model import IpSaeModel, SpaceMode


def seen_indices(ds):
    return ds.indices_of(ds.seen_classes)


class TestBuildSystem:
    def test_hand_worked(self):
        sys_ = model.build_system([[1.0, 2.0]], [[1.0, 1.0]], 2.0)
        assert sys_.A.tolist() == [[2.0]]
        assert sys_.B.tolist() == [[10.0]]
        assert sys_.C.tolist() == [[9.0]]

    def test_shapes_and_psd(self, rng):
        Xp, S = rng.standard_normal((9, 40)), rng.standard_normal((4, 40))
        sys_ = model.build_system(Xp, S, 0.5)
        assert sys_.A.shape == (4, 4) and sys_.B.shape == (9, 9) and sys_.C.shape == (4, 9)
        for M in (sys_.A, sys_.B):
            assert np.array_equal(M, M.T)
            assert np.linalg.eigvalsh(M).min() >= -1e-10 * np.trace(M)

    @pytest.mark.parametrize("lam", [0.0, -1.0])
    def test_lambda_must_be_positive(self, lam):
        with pytest.raises(NonPositiveLambda):
            model.build_system(np.ones((2, 3)), np.ones((1, 3)), lam)

    def test_sample_mismatch(self):
        with pytest.raises(DimensionMismatch):
            model.build_system(np.ones((2, 3)), np.ones((1, 4)), 1.0)


class TestFit:
    def test_original_mode_recovers_planted_map(self, noiseless_dataset):
        ds = noiseless_dataset
        m = model.fit(ds, seen_indices(ds), 1.0, SpaceMode.ORIGINAL)
        assert m.nullified_modes == 0
        idx = ds.indices_of(ds.unseen_classes)
        S = sample_attributes_for(ds, idx)
        err = np.linalg.norm(model.encode(m, ds.features[:, idx]) - S) / np.linalg.norm(S)
        assert err <= 1e-6

    @pytest.mark.parametrize("lam", [0.5, 1.0, 4.0])
    def test_enriched_mode_scales_attributes(self, noiseless_dataset, lam):
        ds = noiseless_dataset
        m = model.fit(ds, seen_indices(ds), lam, SpaceMode.ENRICHED)
        idx = ds.indices_of(ds.unseen_classes)
        S = sample_attributes_for(ds, idx)
        encoded = model.encode(m, model.input_space(ds, idx, SpaceMode.ENRICHED))
        scale = 2 * (1 + lam) / (1 + 2 * lam)
        np.testing.assert_allclose(encoded, scale * S, atol=1e-8)

    def test_shapes(self, reference_dataset):
        ds = reference_dataset
        enriched = model.fit(ds, seen_indices(ds), 1.0, "enriched")
        original = model.fit(ds, seen_indices(ds), 1.0, "original")
        assert enriched.W.shape == (ds.k, ds.d + ds.k)
        assert original.W.shape == (ds.k, ds.d)
        assert enriched.m == ds.d + ds.k and original.m == ds.d

    def test_fits_the_sylvester_system(self, reference_dataset):
        ds = reference_dataset
        idx = seen_indices(ds)
        m = model.fit(ds, idx, 0.7)
        sys_ = model.build_system(model.input_space(ds, idx, "enriched"),
                                  sample_attributes_for(ds, idx), 0.7)
        res = linalg.sylvester_residual(sys_.A, sys_.B, sys_.C, m.W)
        assert res <= model.residual_limit(sys_.A, sys_.B, m.W)
        assert m.diagnostics()["rank_W"] == ds.k

    def test_single_class_training_nullifies_modes(self):
        ds = generate_synthetic(SyntheticConfig(d=6, k=4, n_per_class=5, C_seen=2, C_unseen=2,
                                                noise_sigma=0.0, attribute_density=0.5, seed=3))
        c = ds.seen_classes[0]
        m = model.fit(ds, ds.indices_of([c]), 1.0)
        assert m.nullified_modes > 0
        assert np.isfinite(m.W).all()

    def test_rejects_unseen_samples(self, reference_dataset):
        ds = reference_dataset
        with pytest.raises(UnseenLabelInTraining):
            model.fit(ds, ds.indices_of(ds.unseen_classes), 1.0)

    def test_deterministic(self, reference_dataset):
        a = model.fit(reference_dataset, seen_indices(reference_dataset), 1.0)
        b = model.fit(reference_dataset, seen_indices(reference_dataset), 1.0)
        assert a.W.tobytes() == b.W.tobytes()


class TestProjection:
    def test_encode_decode_linear(self, rng):
        m = IpSaeModel(rng.standard_normal((3, 7)), 1.0, 4, 3)
        x, y = rng.standard_normal((7, 2)), rng.standard_normal((7, 2))
        np.testing.assert_allclose(model.encode(m, 2 * x + y),
                                   2 * model.encode(m, x) + model.encode(m, y))
        s = rng.standard_normal((3, 1))
        np.testing.assert_allclose(model.decode(m, s), m.W.T @ s)

    def test_dimension_checks(self):
        m = IpSaeModel(np.zeros((2, 5)), 1.0, 3, 2)
        with pytest.raises(DimensionMismatch):
            model.encode(m, np.zeros((3, 1)))
        with pytest.raises(DimensionMismatch):
            model.decode(m, np.zeros((3, 1)))
        with pytest.raises(DimensionMismatch):
            IpSaeModel(np.zeros((2, 3)), 1.0, 3, 2, SpaceMode.ENRICHED)


class TestHubnessBound:
    def test_identity(self):
        out = model.hubness_bound(np.eye(3), 1.0)
        assert out["alpha"] == pytest.approx(1.0, abs=1e-12)
        assert out["bound"] == pytest.approx(0.5, abs=1e-12)
        assert out["lhs"] == pytest.approx(0.5, abs=1e-10)

    def test_large_lambda(self):
        out = model.hubness_bound(np.eye(2), 1e6)
        assert out["bound"] == pytest.approx(1 / (1 + 1e6), rel=1e-12)
        assert out["lhs"] == pytest.approx(out["bound"], rel=1e-6)

    def test_random_instance(self, rng):
        out = model.hubness_bound(rng.standard_normal((3, 8)), 0.7)
        assert abs(out["lhs"] - out["bound"]) <= 1e-6 * out["bound"]
        assert out["bound"] < 1

    @pytest.mark.parametrize("seed", range(5))
    def test_ridge_reconstruction_contracts(self, seed):
        rng = np.random.default_rng(seed)
        Xp, S = rng.standard_normal((10, 25)), rng.standard_normal((4, 25))
        W = linalg.ridge_solve(Xp, S, 1.0)
        assert np.linalg.norm(W @ S, 2) <= np.linalg.norm(Xp, 2) * (1 + 1e-12)


class TestModelFile:
    @pytest.mark.parametrize("mode", list(SpaceMode))
    def test_round_trip(self, tmp_path, reference_dataset, mode):
        m = model.fit(reference_dataset, seen_indices(reference_dataset), 0.3, mode)
        model.save_model(m, tmp_path / "model.bin")
        back = model.load_model(tmp_path / "model.bin")
        assert back.W.tobytes() == m.W.tobytes()
        assert (back.lam, back.d, back.k, back.space_mode) == (m.lam, m.d, m.k, m.space_mode)

    def test_header_layout(self, tmp_path):
        m = IpSaeModel(np.arange(6.0).reshape(2, 3), 0.25, 3, 2, SpaceMode.ORIGINAL)
        model.save_model(m, tmp_path / "m.bin")
        raw = (tmp_path / "m.bin").read_bytes()
        assert raw[:4] == b"IPSW"
        assert len(raw) == 25 + 48
        assert raw[16] == 1

    def test_corrupt_files(self, tmp_path):
        p = tmp_path / "m.bin"
        model.save_model(IpSaeModel(np.ones((1, 2)), 1.0, 1, 1), p)
        raw = p.read_bytes()
        for bad in (b"NOPE" + raw[4:], raw[:-1], raw[:10]):
            p.write_bytes(bad)
            with pytest.raises(FormatError):
                model.load_model(p)
        with pytest.raises(MissingFile):
            model.load_model(tmp_path / "absent.bin")
