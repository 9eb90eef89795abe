import numpy as np
import pytest

from factories import make_mlp, make_noise_model
from gradcheck import assert_grad_close, numeric_grad
from src.dbc import Policy
from src.diffusion import make_schedule
from src.errors import ConfigError, UsageError
from src.guidance import (
    CondDiffusionPolicy, EnergyModel, GanPair, METHODS, VaeModel, act_diffusion_policy, act_ibc,
    disc_loss, dp_loss, ebm_guidance_loss, generator_loss, get_method, infonce_loss, train_gan_bc,
    train_diffusion_policy, train_ebm, train_method, vae_guidance_loss, vae_loss,
)
from src.guidance.ebm import sample_negatives
from src.guidance.vae import kl_to_standard_normal
from src.harness.dataset import DemoDataset
from src.numcore import Rng, frozen
from src.numcore.losses import sigmoid


class QuadraticEnergy:
    """scale * ||a - target||^2, ignoring the state."""

    def __init__(self, target, scale=1.0):
        self.target = np.asarray(target, dtype=np.float64)
        self.scale = scale
        self.action_dim = self.target.size
        self.norm = None

    def energy(self, states, actions):
        diff = np.asarray(actions) - self.target
        return self.scale * np.sum(diff * diff, axis=1)

    def energy_and_grad(self, states, actions):
        diff = np.asarray(actions) - self.target
        return self.scale * np.sum(diff * diff, axis=1), 2.0 * self.scale * diff


class ConstantEnergy:
    action_dim = 2
    norm = None

    def energy(self, states, actions):
        return np.full(np.asarray(actions).shape[0], 3.0)

    def energy_and_grad(self, states, actions):
        return self.energy(states, actions), np.zeros_like(np.asarray(actions, dtype=np.float64))


def _vae(latent=3, seed=0):
    return VaeModel(make_mlp([5, 6, 2 * latent], seed=seed), make_mlp([latent, 6, 5], seed=seed + 1), latent, 3, 2)


# --- energy models -------------------------------------------------------------------------------

def test_infonce_gradient_matches_finite_differences():
    ebm = EnergyModel(make_mlp([5, 6, 1], seed=2), 3, 2)
    rng = Rng(0)
    states, actions = rng.gaussian(4, 3), rng.gaussian(4, 2)
    negatives = rng.gaussian(16, 2).reshape(4, 4, 2)

    def value():
        return infonce_loss(ebm, states, actions, negatives)[0]

    loss, d_energy = infonce_loss(ebm, states, actions, negatives)
    ebm.net.backward(d_energy)
    assert loss > 0.0
    assert_grad_close(ebm.net.grads, numeric_grad(value, ebm.net.params))


def test_energy_guidance_points_toward_low_energy():
    target = np.array([0.3, -0.2])
    oracle = QuadraticEnergy(target, scale=1.0)
    pred = Rng(1).gaussian(5, 2)
    value, d_pred = ebm_guidance_loss(oracle, None, np.zeros((5, 3)), predicted_actions=pred)
    assert value == pytest.approx(np.mean(np.sum((pred - target) ** 2, axis=1)))
    # descent direction is -d_pred
    np.testing.assert_allclose(-d_pred, 2.0 * (target - pred) / 5)


def test_constant_energy_gives_no_guidance():
    value, d_pred = ebm_guidance_loss(ConstantEnergy(), None, np.zeros((4, 3)), predicted_actions=np.ones((4, 2)))
    assert value == 3.0
    assert np.all(d_pred == 0.0)


def test_trained_energy_must_be_frozen_for_guidance():
    ebm = EnergyModel(make_mlp([5, 4, 1]), 3, 2)
    with pytest.raises(UsageError):
        ebm.energy_and_grad(np.zeros((1, 3)), np.zeros((1, 2)))


def test_trained_energy_prefers_expert_actions(tiny_cfg):
    rng = Rng(0)
    states = rng.gaussian(200, 3)
    actions = np.array([0.4, -0.3]) + 0.05 * rng.gaussian(200, 2)
    data = DemoDataset(np.repeat(np.arange(4), 50), np.tile(np.arange(50), 4), states, actions)
    cfg = tiny_cfg.with_overrides(ebm_hidden_dim=16, ebm_epochs=30, ebm_lr=3e-3, n_neg=16, batch_size=32)
    ebm = train_ebm(data, cfg, Rng(1))

    s, a = data.normalized()
    negatives = sample_negatives(Rng(2), 200, 16, 2, -1.0, 1.0, data.norm_stats)
    expert = ebm.energy(s, a)
    random = ebm.energy(np.repeat(s, 16, axis=0), negatives.reshape(-1, 2))
    assert expert.mean() < random.mean()


def test_derivative_free_inference_finds_quadratic_minimum():
    rng = Rng(21)
    targets = rng.uniform(-1.0, 1.0, 100, 2)
    for i, target in enumerate(targets):
        best = act_ibc(QuadraticEnergy(target), np.zeros(3), Rng(100 + i), n_samples=1000, n_iters=3)
        assert np.all(np.abs(best - target) <= 0.05)


def test_derivative_free_inference_with_constant_energy_is_seeded():
    first = act_ibc(ConstantEnergy(), np.zeros(3), Rng(4), n_samples=64)
    second = act_ibc(ConstantEnergy(), np.zeros(3), Rng(4), n_samples=64)
    np.testing.assert_array_equal(first, second)
    assert np.all(np.abs(first) <= 1.0)


def test_scaling_energy_and_temperature_together_changes_nothing():
    target = [0.1, 0.4]
    base = act_ibc(QuadraticEnergy(target, scale=10.0), np.zeros(3), Rng(8), n_samples=200, temperature=1.0)
    scaled = act_ibc(QuadraticEnergy(target, scale=20.0), np.zeros(3), Rng(8), n_samples=200, temperature=2.0)
    np.testing.assert_array_equal(base, scaled)


# --- VAE -----------------------------------------------------------------------------------------

def test_kl_vanishes_at_standard_normal():
    np.testing.assert_array_equal(kl_to_standard_normal(np.zeros((3, 2)), np.zeros((3, 2))), np.zeros(3))
    assert kl_to_standard_normal(np.ones((1, 2)), np.zeros((1, 2)))[0] == pytest.approx(1.0)


def test_vae_loss_gradients_match_finite_differences():
    vae = _vae()
    rng = Rng(3)
    x, xi = rng.gaussian(4, 5), rng.gaussian(4, 3)

    def value():
        return vae_loss(vae, x, xi, kl_weight=0.5, track=False).value

    d_x = vae_loss(vae, x, xi, kl_weight=0.5).backward()
    assert_grad_close(vae.encoder.grads, numeric_grad(value, vae.encoder.params))
    assert_grad_close(vae.decoder.grads, numeric_grad(value, vae.decoder.params))
    assert_grad_close(d_x, numeric_grad(value, x))


def test_vae_guidance_is_zero_on_expert_actions():
    vae = _vae().freeze()
    rng = Rng(5)
    states, actions = rng.gaussian(6, 3), rng.gaussian(6, 2)
    value, d_pred = vae_guidance_loss(vae, None, states, actions, rng.gaussian(6, 3), predicted_actions=actions)
    assert value == 0.0
    assert np.all(d_pred == 0.0)


# --- GAN -----------------------------------------------------------------------------------------

def test_discriminator_loss_matches_log_form():
    real, fake = np.array([[0.5], [1.5]]), np.array([[-0.3], [0.2]])
    value, d_real, d_fake = disc_loss(real, fake)
    oracle = np.mean(-np.log(sigmoid(real))) + np.mean(-np.log(1.0 - sigmoid(fake)))
    assert value == pytest.approx(oracle, abs=1e-12)
    np.testing.assert_allclose(d_real, (sigmoid(real) - 1.0) / 2)
    np.testing.assert_allclose(d_fake, sigmoid(fake) / 2)


def test_perfect_discriminator_has_near_zero_loss():
    value, _, _ = disc_loss(np.full((4, 1), 40.0), np.full((4, 1), -40.0))
    assert value < 1e-12
    g_value, d_logits = generator_loss(np.full((4, 1), -40.0))
    assert g_value == pytest.approx(40.0)
    np.testing.assert_allclose(d_logits, -0.25)


def test_gan_training_freezes_discriminator(tiny_dataset, tiny_cfg):
    gan = train_gan_bc(tiny_dataset, tiny_cfg, Rng(0))
    assert isinstance(gan, GanPair)
    assert not gan.discriminator.trainable
    probs = gan.probability(*tiny_dataset.normalized())
    assert probs.shape == (len(tiny_dataset),)
    assert np.all((probs > 0.0) & (probs < 1.0))


# --- diffusion policy ----------------------------------------------------------------------------

def _dp(seed=0):
    sched = make_schedule(10, 1e-3, 0.2)
    return CondDiffusionPolicy(make_mlp([3 + 2 + 4, 6, 2], seed=seed), sched, 3, 2)


def test_diffusion_policy_recovers_a_constant_action(tiny_cfg):
    states = Rng(0).gaussian(64, 3)
    actions = np.tile([0.3, -0.5], (64, 1))
    data = DemoDataset(np.repeat(np.arange(4), 16), np.tile(np.arange(16), 4), states, actions)
    dp = train_diffusion_policy(data, tiny_cfg.with_overrides(dp_hidden_dim=16, dp_epochs=20, dp_lr=3e-3), Rng(1))
    rng = Rng(2)
    for state in states[:5]:
        np.testing.assert_allclose(act_diffusion_policy(dp, state, rng), [0.3, -0.5], atol=0.1)


def test_dp_loss_gradient_matches_finite_differences():
    dp = _dp()
    rng = Rng(6)
    states, actions = rng.gaussian(5, 3), rng.gaussian(5, 2)
    n, eps = rng.integers(1, 11, 5), rng.gaussian(5, 2)

    def value():
        return dp_loss(dp, states, actions, n, eps)[0]

    _, d_eps_hat = dp_loss(dp, states, actions, n, eps)
    dp.net.backward(d_eps_hat)
    assert_grad_close(dp.net.grads, numeric_grad(value, dp.net.params))


def test_deterministic_dp_action_depends_only_on_start():
    dp = _dp(seed=1)
    a_N = np.array([0.4, -1.2])
    first = act_diffusion_policy(dp, np.ones(3), Rng(0), deterministic=True, a_N=a_N)
    second = act_diffusion_policy(dp, np.ones(3), Rng(99), deterministic=True, a_N=a_N)
    np.testing.assert_array_equal(first, second)
    stochastic = act_diffusion_policy(dp, np.ones(3), Rng(0))
    assert stochastic.shape == (2,)


# --- registry ------------------------------------------------------------------------------------

def test_registry_lists_every_method():
    assert set(METHODS) == {"bc", "ibc", "dp", "ebm", "vae", "gan", "dbc"}
    assert get_method("dbc").needs_diffusion_model
    with pytest.raises(ConfigError):
        get_method("bcq")


def test_dbc_needs_a_diffusion_model(tiny_dataset, tiny_cfg):
    with pytest.raises(UsageError):
        train_method("dbc", tiny_dataset, tiny_cfg, Rng(0))


@pytest.mark.parametrize("name", sorted(METHODS))
def test_every_method_trains_and_acts(tiny_dataset, tiny_cfg, name):
    phi = make_noise_model(3, 2, hidden=8).freeze() if name == "dbc" else None
    artifact = train_method(name, tiny_dataset, tiny_cfg, Rng(0), phi=phi)
    actor = get_method(name).make_actor(artifact, tiny_cfg)
    action = actor(tiny_dataset.states[0], None, Rng(1))
    assert np.asarray(action).shape == (2,)
    assert np.all(np.isfinite(action))
    if name in ("bc", "ebm", "vae", "gan", "dbc"):
        assert isinstance(artifact, Policy)


def test_gan_losses_gradients_match_finite_differences():
    disc = make_mlp([5, 6, 1], seed=3)
    gen = make_mlp([3, 5, 2], seed=4)
    states, actions = Rng(0).gaussian(4, 3), Rng(1).gaussian(4, 2)

    def d_value():
        fake = np.hstack([states, gen.predict(states)])
        return disc_loss(disc.predict(np.hstack([states, actions])), disc.predict(fake))[0]

    def g_value():
        return generator_loss(disc.predict(np.hstack([states, gen.predict(states)])))[0]

    logits = disc.forward(np.vstack([np.hstack([states, actions]), np.hstack([states, gen.predict(states)])]))
    _, d_real, d_fake = disc_loss(logits[:4], logits[4:])
    disc.backward(np.vstack([d_real, d_fake]))
    assert_grad_close(disc.grads, numeric_grad(d_value, disc.params))

    with frozen(disc):
        fake_logits = disc.forward(np.hstack([states, gen.forward(states)]))
        _, d_logits = generator_loss(fake_logits)
        d_actions = disc.backward(d_logits)[:, 3:]
    gen.backward(d_actions)
    assert_grad_close(gen.grads, numeric_grad(g_value, gen.params))
