"""Tests for exogenous encodings, bundle validation, and the embedding."""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trackcast import autodiff as ad
from trackcast.errors import EncodingError, ValidationError
from trackcast.exogenous import (EMBED_DIM, EmbeddingParams, ExoFlags,
                                 ExoNormStats, ExogenousBundle, encode_binary,
                                 encode_structure, embed_bundle,
                                 embed_window_steps)
from trackcast.rng import substream


def random_bundle(rng, T=8, L=24, maintenance_density=0.05) -> ExogenousBundle:
    structure = rng.integers(0, 5, size=L)
    ballast = rng.uniform(0, 20, size=(T, L))
    ballast[:, structure == 0] = 0.0  # bridges carry zero ballast age
    return ExogenousBundle(
        maintenance=(rng.random((T, 9, L)) < maintenance_density).astype(float),
        under_structure=structure,
        rail_joint=(rng.random((4, L)) < 0.1).astype(float),
        ballast_age=ballast,
        tonnage=rng.uniform(0, 5, size=(T, L)),
        rainfall=rng.uniform(0, 30, size=(T, 4, L)),
    )


class TestEncoders:
    def test_binary_one(self):
        npt.assert_array_equal(encode_binary(1), [1.0, 0.0])

    def test_binary_zero(self):
        npt.assert_array_equal(encode_binary(0), [0.0, 1.0])

    @given(st.integers(min_value=0, max_value=1))
    def test_binary_one_hot_property(self, b):
        v = encode_binary(b)
        assert v.sum() == 1.0
        assert np.any(v != 0.0)

    def test_binary_rejects_other(self):
        with pytest.raises(EncodingError):
            encode_binary(2)

    def test_structure_example(self):
        npt.assert_array_equal(encode_structure(1), [0, 1, 0, 0, 0])

    def test_structure_zero(self):
        npt.assert_array_equal(encode_structure(0), [1, 0, 0, 0, 0])

    @given(st.integers(min_value=0, max_value=4))
    def test_structure_single_nonzero(self, c):
        v = encode_structure(c)
        assert np.count_nonzero(v) == 1
        assert v[c] == 1.0

    def test_structure_out_of_range(self):
        with pytest.raises(EncodingError):
            encode_structure(5)


class TestBundleValidation:
    def test_valid_bundle_passes(self):
        bundle = random_bundle(substream(0, "test-exo"))
        assert bundle.validate() == []

    def test_nonbinary_maintenance_reported_with_location(self):
        bundle = random_bundle(substream(1, "test-exo"))
        bundle.maintenance[3, 2, 7] = 2.0
        lines = bundle.validate()
        assert any(line.startswith("maintenance 3 7") for line in lines)
        with pytest.raises(ValidationError):
            bundle.check()

    def test_bridge_ballast_age_must_be_zero(self):
        bundle = random_bundle(substream(2, "test-exo"))
        bundle.under_structure[5] = 0
        bundle.ballast_age[1, 5] = 3.0
        lines = bundle.validate()
        assert any("bridge" in line for line in lines)

    def test_negative_rainfall_reported(self):
        bundle = random_bundle(substream(3, "test-exo"))
        bundle.rainfall[2, 1, 4] = -1.0
        assert any(line.startswith("rainfall 2 4") for line in bundle.validate())


class TestEmbedBundle:
    def setup_method(self):
        self.rng = substream(4, "test-exo")
        self.bundle = random_bundle(self.rng, T=8, L=24)
        self.params = EmbeddingParams.init(self.rng)
        self.window = np.arange(2, 5)

    def test_output_shape_and_channel_count(self):
        z = embed_bundle(self.bundle, self.params, self.window)
        assert z.data.shape == (3, 62, 24)
        assert ExoFlags().channel_count() == 62

    def test_flag_subsets_shrink_channels(self):
        for source in ("maintenance", "structure", "rail_joint", "ballast_age",
                       "tonnage", "rainfall"):
            flags = ExoFlags.all_except(source)
            z = embed_bundle(self.bundle, self.params, self.window, flags=flags)
            assert z.data.shape == (3, flags.channel_count(), 24)

    def test_all_zero_maintenance_constant_embedding(self):
        bundle = random_bundle(substream(5, "test-exo"), T=6, L=16)
        bundle.maintenance[:] = 0.0
        params = EmbeddingParams.init(substream(6, "test-exo"))
        params.maintenance_b.data[:] = 0.0
        z = embed_bundle(bundle, params, np.arange(4))
        block = z.data[:, :36, :].reshape(4, 9, 4, 16)
        expected = params.maintenance_w.data[:, 1]  # image of (0, 1)
        npt.assert_allclose(block, np.broadcast_to(expected[None, None, :, None],
                                                   block.shape), rtol=0, atol=0)

    def test_identity_like_dense_maps_flags(self):
        bundle = random_bundle(substream(7, "test-exo"), T=6, L=16)
        bundle.maintenance[:] = 0.0
        bundle.maintenance[3, 2, 5] = 1.0
        params = EmbeddingParams.init(substream(8, "test-exo"))
        params.maintenance_w.data[:] = 0.0
        params.maintenance_w.data[0, 0] = 1.0
        params.maintenance_w.data[1, 1] = 1.0
        params.maintenance_b.data[:] = 0.0
        z = embed_bundle(bundle, params, np.arange(2, 6))
        block = z.data[:, :36, :].reshape(4, 9, 4, 16)
        npt.assert_array_equal(block[1, 2, :, 5], [1.0, 0.0, 0.0, 0.0])
        npt.assert_array_equal(block[0, 2, :, 5], [0.0, 1.0, 0.0, 0.0])
        npt.assert_array_equal(block[1, 3, :, 5], [0.0, 1.0, 0.0, 0.0])

    def test_passthrough_bit_exact_without_normalization(self):
        z = embed_bundle(self.bundle, self.params, self.window)
        window = self.window
        npt.assert_array_equal(z.data[:, 56, :], self.bundle.ballast_age[window])
        npt.assert_array_equal(z.data[:, 57, :], self.bundle.tonnage[window])
        npt.assert_array_equal(z.data[:, 58:62, :], self.bundle.rainfall[window])

    def test_passthrough_standardization(self):
        norm = ExoNormStats.from_training(self.bundle, t_stop=6)
        z = embed_bundle(self.bundle, self.params, self.window, norm=norm)
        expected = (self.bundle.tonnage[self.window] - norm.tonnage_mean) / norm.tonnage_std
        npt.assert_allclose(z.data[:, 57, :], expected, rtol=0, atol=1e-15)

    def test_temporal_constancy_of_spatial_sources(self):
        z = embed_bundle(self.bundle, self.params, self.window)
        static = z.data[:, 36:56, :]  # structure + rail joint blocks
        for t in range(1, z.data.shape[0]):
            npt.assert_array_equal(static[t], static[0])

    def test_embedding_receives_gradient(self):
        bundle = random_bundle(substream(9, "test-exo"), T=8, L=16,
                               maintenance_density=0.3)
        params = EmbeddingParams.init(substream(10, "test-exo"))
        steps = embed_window_steps(bundle, params, np.array([[0, 1, 2]]))
        target = np.zeros(steps[-1].data.shape)
        loss = ad.mse_loss(steps[-1], target + 1.0)
        ad.backward(loss)
        assert params.maintenance_w.grad is not None
        assert np.abs(params.maintenance_w.grad).max() > 0

    def test_invalid_bundle_rejected_by_embed(self):
        bundle = random_bundle(substream(11, "test-exo"))
        bundle.maintenance[0, 0, 0] = 5.0
        with pytest.raises(ValidationError):
            embed_bundle(bundle, self.params, self.window)

    def test_window_out_of_range(self):
        with pytest.raises(ValidationError):
            embed_window_steps(self.bundle, self.params, np.array([[6, 7, 8]]))

    def test_channel_order_stable_across_runs(self):
        z1 = embed_bundle(self.bundle, self.params, self.window)
        z2 = embed_bundle(self.bundle, self.params, self.window)
        npt.assert_array_equal(z1.data, z2.data)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_one_hot_inputs_never_zero(seed):
    """No embedding-layer input vector is ever the zero vector."""
    rng = np.random.default_rng(seed)
    bundle = random_bundle(rng, T=4, L=8, maintenance_density=0.5)
    from trackcast.exogenous import _binary_onehot

    for arr in (bundle.maintenance.reshape(-1), bundle.rail_joint.reshape(-1)):
        onehot = _binary_onehot(arr.astype(float))
        assert np.all(onehot.sum(axis=0) == 1.0)
    onehot = np.zeros((5, bundle.positions))
    onehot[bundle.under_structure, np.arange(bundle.positions)] = 1.0
    assert np.all(onehot.sum(axis=0) == 1.0)
