import numpy as np
import pytest

from factories import make_noise_model
from gradcheck import assert_grad_close, numeric_grad
from src.diffusion import (
    GridSpec, NoiseModel, diff_loss, forward_noise, gradient_field, make_schedule, reconstruction_mse,
    reverse_from, sample, scaled_schedule, timestep_embedding, train_diffusion, write_field_csv,
)
from src.diffusion.model import EMBED_DIM
from src.errors import ConfigError, RangeError, ShapeError, StateError
from src.harness.config import TrainConfig
from src.harness.dataset import DemoDataset
from src.numcore import MlpModel, Rng


def test_schedule_tables():
    sched = make_schedule(100, 1e-4, 0.02)
    assert sched.N == 100
    assert sched.beta[0] == pytest.approx(1e-4)
    assert sched.beta[-1] == pytest.approx(0.02)
    assert np.all(np.diff(sched.alpha_bar) < 0)
    np.testing.assert_allclose(sched.alpha_bar[0], 1 - 1e-4)


def test_default_scaled_schedule_ends_near_pure_noise():
    sched = scaled_schedule(100, 1e-4, 0.02, 1000)
    assert sched.beta[0] == pytest.approx(1e-3)
    assert sched.beta[-1] == pytest.approx(0.2)
    assert sched.alpha_bar[-1] < 0.01
    same = scaled_schedule(1000, 1e-4, 0.02, 1000)
    np.testing.assert_array_equal(same.beta, make_schedule(1000, 1e-4, 0.02).beta)


def test_schedule_rejects_bad_input():
    with pytest.raises(ConfigError):
        make_schedule(0, 1e-4, 0.02)
    with pytest.raises(ConfigError):
        make_schedule(10, 0.02, 1e-4)
    with pytest.raises(ConfigError):
        make_schedule(10, 1e-4, 1.0)


def test_noise_level_range():
    sched = make_schedule(10, 1e-3, 0.2)
    with pytest.raises(RangeError):
        sched.at(sched.alpha_bar, 0)
    with pytest.raises(RangeError):
        sched.at(sched.alpha_bar, np.array([1, 11]))
    assert sched.at(sched.alpha_bar, 10) == sched.alpha_bar[-1]


def test_timestep_embedding_shape_and_range():
    emb = timestep_embedding(np.array([1, 5, 10]), 10, 3)
    assert emb.shape == (3, EMBED_DIM)
    assert np.all(np.abs(emb) <= 1.0)
    np.testing.assert_array_equal(timestep_embedding(4, 10, 2)[0], timestep_embedding(4, 10, 2)[1])


def test_forward_noise_closed_form():
    sched = make_schedule(10, 1e-3, 0.2)
    x0 = np.ones((2, 3))
    eps = np.full((2, 3), 2.0)
    ab = sched.alpha_bar[4]
    np.testing.assert_allclose(forward_noise(x0, 5, eps, sched), np.sqrt(ab) + 2.0 * np.sqrt(1 - ab))
    with pytest.raises(ShapeError):
        forward_noise(x0, 5, np.ones((2, 2)), sched)


def test_diff_loss_gradients_match_finite_differences():
    phi = make_noise_model(2, 2)
    rng = Rng(0)
    x0 = rng.gaussian(5, 4)
    n = rng.integers(1, 11, 5)
    eps = rng.gaussian(5, 4)

    def value():
        return diff_loss(phi, x0, n, eps, phi.sched, track=False).value

    term = diff_loss(phi, x0, n, eps, phi.sched)
    d_x0 = term.backward()
    assert_grad_close(d_x0, numeric_grad(value, x0))
    assert_grad_close(phi.net.grads, numeric_grad(value, phi.net.params))


def test_weighted_backward_matches_weighted_sum():
    phi = make_noise_model(2, 1)
    rng = Rng(1)
    x0, eps = rng.gaussian(4, 3), rng.gaussian(4, 3)
    weights = np.array([0.25, 0.0, 0.5, 0.25])

    def value():
        return float(diff_loss(phi, x0, 3, eps, phi.sched, track=False).per_sample @ weights)

    phi.freeze()
    d_x0 = diff_loss(phi, x0, 3, eps, phi.sched).backward(weights)
    assert_grad_close(d_x0, numeric_grad(value, x0))
    assert np.all(phi.net.grads == 0.0)


def test_detached_term_has_no_gradient():
    phi = make_noise_model(1, 1)
    term = diff_loss(phi, np.zeros((2, 2)), 1, np.ones((2, 2)), phi.sched, track=False)
    with pytest.raises(StateError):
        term.backward()


def test_sampling_is_deterministic_per_seed():
    phi = make_noise_model(2, 2).freeze()
    a = sample(phi, phi.sched, 7, Rng(3))
    b = sample(phi, phi.sched, 7, Rng(3))
    assert a.shape == (7, 4)
    np.testing.assert_array_equal(a, b)


def test_deterministic_reverse_depends_only_on_start():
    phi = make_noise_model(1, 1).freeze()
    x_n = Rng(0).gaussian(3, 2)
    first = reverse_from(phi, x_n, phi.sched.N, phi.sched, Rng(1), deterministic=True)
    second = reverse_from(phi, x_n, phi.sched.N, phi.sched, Rng(2), deterministic=True)
    np.testing.assert_array_equal(first, second)


def test_gradient_field_rows_and_csv(tmp_path):
    phi = make_noise_model(2, 2).freeze()
    grid = GridSpec(dims=[-2, -1], lo=-1.0, hi=1.0, resolution=4)
    rows = gradient_field(phi, grid, 1, np.zeros(4))
    assert rows.shape == (16, 4)
    assert rows[:, 0].min() == -1.0 and rows[:, 1].max() == 1.0
    path = write_field_csv(rows, tmp_path / "field.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,dx,dy"
    assert len(lines) == 17
    with pytest.raises(ShapeError):
        gradient_field(phi, GridSpec(dims=[0, 1, 2]), 1, np.zeros(4))


def test_train_diffusion_returns_frozen_model_with_metadata(tiny_dataset, tiny_cfg):
    cfg = tiny_cfg.with_overrides(noise_level=0.01)
    phi = train_diffusion(tiny_dataset, cfg, Rng(0))
    assert not phi.net.trainable
    assert phi.metadata == {"noise_level": 0.01, "n_steps": 10}
    again = train_diffusion(tiny_dataset, cfg, Rng(0))
    np.testing.assert_array_equal(phi.net.params, again.net.params)


def test_reconstruction_mse_is_finite(tiny_dataset, tiny_cfg):
    phi = train_diffusion(tiny_dataset, tiny_cfg, Rng(0))
    mse = reconstruction_mse(phi, tiny_dataset, phi.sched, Rng(1))
    assert np.isfinite(mse) and mse >= 0.0


@pytest.mark.slow
def test_sampler_covers_four_mode_mixture(tiny_cfg):
    centers = np.array([[2.0, 2.0], [2.0, -2.0], [-2.0, 2.0], [-2.0, -2.0]])
    rng = Rng(0)
    labels = rng.integers(0, 4, 5000)
    points = centers[labels] + 0.2 * rng.gaussian(5000, 2)
    # one state dim and one action dim, so the joint space is the plane
    data = DemoDataset(np.arange(5000), np.zeros(5000), points[:, :1], points[:, 1:])
    cfg = tiny_cfg.with_overrides(dm_hidden_dim=128, dm_num_layers=4, dm_epochs=150, dm_batch_size=128,
                                  dm_lr=1e-3, n_steps=100, beta_start=1e-4, beta_end=0.02,
                                  beta_reference_steps=1000, log_every=50)
    phi = train_diffusion(data, cfg, Rng(1))

    raw = sample(phi, phi.sched, 1000, Rng(2))
    stats = data.norm_stats
    raw = np.hstack([raw[:, :1] * stats.states.std[0] + stats.states.mean[0],
                     raw[:, 1:] * stats.actions.std[0] + stats.actions.mean[0]])
    dists = np.linalg.norm(raw[:, None, :] - centers[None, :, :], axis=2)
    nearest = dists.argmin(axis=1)
    shares = np.bincount(nearest, minlength=4) / 1000
    assert shares.min() >= 0.10
    assert np.mean(dists.min(axis=1) <= 3 * 0.2) >= 0.90


def _origin_dataset(rows=256):
    return DemoDataset(np.arange(rows), np.zeros(rows), np.zeros((rows, 1)), np.zeros((rows, 1)))


def _small_dm_cfg(**overrides):
    values = dict(dm_hidden_dim=32, dm_num_layers=3, dm_epochs=200, dm_batch_size=32, dm_lr=5e-3,
                  n_steps=10, beta_start=1e-3, beta_end=0.2, beta_reference_steps=0, log_every=100)
    values.update(overrides)
    return TrainConfig(**values)


@pytest.fixture(scope="module")
def origin_phi():
    """Noise model fit to a point mass at the origin of the (s, a) plane."""
    return train_diffusion(_origin_dataset(), _small_dm_cfg(), Rng(0))


def test_point_mass_samples_center_on_it(origin_phi):
    samples = sample(origin_phi, origin_phi.sched, 1000, Rng(3))
    assert np.all(np.abs(samples.mean(axis=0)) < 0.1)


def test_point_mass_field_points_at_it(origin_phi):
    grid = GridSpec(dims=[0, 1], lo=-1.5, hi=1.5, resolution=10)
    rows = gradient_field(origin_phi, grid, origin_phi.sched.N, np.zeros(2))
    toward = rows[:, 0] * rows[:, 2] + rows[:, 1] * rows[:, 3] < 0
    assert np.mean(toward) >= 0.9


def test_zero_network_has_zero_field():
    phi = NoiseModel(MlpModel([2 + EMBED_DIM, 4, 2], "relu"), 1, 1, make_schedule(10, 1e-3, 0.2))
    rows = gradient_field(phi, GridSpec(dims=[0, 1], resolution=5), 3, np.zeros(2))
    assert np.all(rows[:, 2:] == 0.0)


def test_training_lowers_reconstruction_error(origin_phi):
    data = _origin_dataset()
    untrained = make_noise_model(1, 1, hidden=32, seed=5, activation="relu")
    trained_mse = reconstruction_mse(origin_phi, data, origin_phi.sched, Rng(4))
    untrained_mse = reconstruction_mse(untrained, data, untrained.sched, Rng(4))
    assert untrained_mse >= trained_mse


def test_expert_pairs_denoise_better_than_random_pairs():
    centers = np.array([[2.0, 2.0], [2.0, -2.0], [-2.0, 2.0], [-2.0, -2.0]])
    rng = Rng(0)

    def mixture(rows, norm_stats=None):
        points = centers[rng.integers(0, 4, rows)] + 0.2 * rng.gaussian(rows, 2)
        return DemoDataset(np.arange(rows), np.zeros(rows), points[:, :1], points[:, 1:], norm_stats=norm_stats)

    train = mixture(1000)
    phi = train_diffusion(train, _small_dm_cfg(dm_epochs=40, dm_batch_size=64, dm_lr=3e-3), Rng(1))
    held_out = mixture(1000, norm_stats=train.norm_stats).joint()
    # uniform over three standard deviations in normalized units
    uniform = rng.uniform(-3.0, 3.0, 1000, 2)
    n, eps = rng.integers(1, 11, 1000), rng.gaussian(1000, 2)
    expert_loss = diff_loss(phi, held_out, n, eps, phi.sched, track=False).value
    random_loss = diff_loss(phi, uniform, n, eps, phi.sched, track=False).value
    assert expert_loss < random_loss
