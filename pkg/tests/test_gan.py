"""Conditional GAN tests. Heavier pipeline-level checks live in acceptance."""

import numpy as np
import pytest

from shapeforge.gan import (
    GanConfig,
    GanModel,
    discriminate,
    load_gan,
    sample,
    save_gan,
    train_gan,
)
from shapeforge.grammar.fixtures import DRONE_2MOTOR, DRONE_4MOTOR
from shapeforge.nn.layers import sigmoid
from shapeforge.vecspace import EmbeddedSequence, SpaceConfig, embed_sequence


@pytest.fixture(scope="module")
def space(drone):
    return SpaceConfig.for_grammar(drone)


@pytest.fixture(scope="module")
def small_data(drone, space, drone_corpus):
    return [embed_sequence(drone, space, s) for s in drone_corpus[:64]]


@pytest.fixture(scope="module")
def quick_model(drone, space, small_data):
    return train_gan(small_data, GanConfig(epochs=8, seed=0), space, drone.shape_types)


class TestTraining:
    def test_epochs_zero_keeps_initialization(self, drone, space, small_data):
        cfg = GanConfig(epochs=0, seed=5)
        trained = train_gan(small_data, cfg, space, drone.shape_types)
        fresh = GanModel.build(cfg, space, drone.shape_types)
        for k in fresh.g_store.params:
            assert np.array_equal(trained.g_store.params[k], fresh.g_store.params[k])
        assert trained.loss_history == []

    def test_empty_dataset_rejected(self, drone, space):
        with pytest.raises(ValueError, match="empty"):
            train_gan([], GanConfig(), space, drone.shape_types)

    def test_shape_mismatch_rejected(self, drone, space):
        bad = EmbeddedSequence(
            matrix=np.zeros((4, space.row_width)),
            label=DRONE_4MOTOR,
            host_indices=(-1,) * 4,
        )
        with pytest.raises(ValueError, match="shape"):
            train_gan([bad], GanConfig(), space, drone.shape_types)

    def test_losses_finite(self, quick_model):
        for h in quick_model.loss_history:
            assert np.isfinite(h["d"]) and np.isfinite(h["g"])

    def test_deterministic_across_runs(self, drone, space, small_data):
        a = train_gan(small_data, GanConfig(epochs=3, seed=11), space, drone.shape_types)
        b = train_gan(small_data, GanConfig(epochs=3, seed=11), space, drone.shape_types)
        for k in a.g_store.params:
            assert np.array_equal(a.g_store.params[k], b.g_store.params[k])
        for k in a.d_store.params:
            assert np.array_equal(a.d_store.params[k], b.d_store.params[k])

    def test_discriminator_learns_separable_case(self, drone, space, small_data):
        """Frozen random generator stand-in: D separates real walks from
        uniform noise with accuracy > 0.95."""
        model = GanModel.build(GanConfig(seed=0), space, drone.shape_types)
        rng = np.random.default_rng(0)
        mats = np.stack([e.matrix for e in small_data])
        labs = np.stack([model.label_onehot(e.label) for e in small_data])
        noise = rng.uniform(0.0, 1.0, size=mats.shape)
        for _ in range(200):
            idx = rng.permutation(len(small_data))[:32]
            model.discriminator_step(mats[idx], labs[idx], noise[idx], labs[idx], 1e-3)
        p_real = sigmoid(model.discriminator.forward(mats, labs))
        p_fake = sigmoid(model.discriminator.forward(noise, labs))
        acc = float(np.concatenate([p_real > 0.5, p_fake <= 0.5]).mean())
        assert acc > 0.95
        assert p_real.mean() > 0.5 > p_fake.mean()


class TestSampling:
    def test_n_zero_gives_empty_list(self, quick_model):
        assert sample(quick_model, DRONE_4MOTOR, 0, seed=1) == []

    def test_same_seed_identical(self, quick_model):
        a = sample(quick_model, DRONE_2MOTOR, 5, seed=3)
        b = sample(quick_model, DRONE_2MOTOR, 5, seed=3)
        for x, y in zip(a, b):
            assert np.array_equal(x.matrix, y.matrix)

    def test_unknown_label_rejected(self, quick_model):
        with pytest.raises(ValueError, match="unknown label"):
            sample(quick_model, "boat", 3, seed=0)

    def test_outputs_in_unit_interval(self, quick_model):
        for e in sample(quick_model, DRONE_4MOTOR, 8, seed=2):
            assert e.matrix.min() >= 0.0 and e.matrix.max() <= 1.0
            assert e.provenance == "generated"

    def test_label_flip_changes_output(self, quick_model):
        """conditioning pathway is alive: same noise, different label."""
        rng = np.random.default_rng(5)
        z = rng.standard_normal((4, quick_model.config.noise_dim))
        a = quick_model.generate(z, np.tile(quick_model.label_onehot(DRONE_4MOTOR), (4, 1)))
        b = quick_model.generate(z, np.tile(quick_model.label_onehot(DRONE_2MOTOR), (4, 1)))
        assert np.abs(a - b).max() > 0.0


class TestDiscriminate:
    def test_untrained_value_in_unit_interval(self, drone, space, small_data):
        model = GanModel.build(GanConfig(seed=2), space, drone.shape_types)
        p = discriminate(model, small_data[0])
        assert 0.0 <= p <= 1.0 and np.isfinite(p)

    def test_shape_mismatch_rejected(self, quick_model):
        bad = EmbeddedSequence(
            matrix=np.zeros((2, 2)), label=DRONE_4MOTOR, host_indices=(-1, -1)
        )
        with pytest.raises(ValueError, match="shape"):
            discriminate(quick_model, bad)


class TestPersistence:
    def test_save_load_bitwise(self, quick_model, tmp_path):
        path = tmp_path / "gan.json"
        save_gan(path, quick_model)
        loaded = load_gan(path)
        assert loaded.config == quick_model.config
        assert loaded.labels == quick_model.labels
        for k in quick_model.g_store.params:
            assert np.array_equal(loaded.g_store.params[k], quick_model.g_store.params[k])
        # loaded model samples identically
        a = sample(quick_model, DRONE_4MOTOR, 3, seed=9)
        b = sample(loaded, DRONE_4MOTOR, 3, seed=9)
        for x, y in zip(a, b):
            assert np.array_equal(x.matrix, y.matrix)

    def test_reject_non_gan_file(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text('{"format": "other"}')
        with pytest.raises(ValueError):
            load_gan(p)
