import logging
from typing import Optional, Tuple

import numpy as np

from src.dbc.losses import dm_loss
from src.dbc.models import Policy
from src.diffusion.trainer import minibatches
from src.errors import ShapeError, StateError
from src.guidance.guided import fit_guided_policy, guided_policy_config
from src.guidance.models import VaeModel
from src.harness.config import TrainConfig
from src.harness.dataset import DemoDataset
from src.numcore import AdamState, Matrix, Rng, adam_step, as_matrix, check_finite, scheduled_lr

logger = logging.getLogger(__name__)


def kl_to_standard_normal(mu: np.ndarray, logvar: np.ndarray) -> np.ndarray:
    """Per-row KL(N(μ, σ²) ‖ N(0, I)) summed over latent dims."""
    return 0.5 * np.sum(mu * mu + np.exp(logvar) - 1.0 - logvar, axis=1)


class VaeLossTerm:
    """
    Per-sample ‖x̂ − x‖² + kl_weight · KL with the reparameterization z = μ + σ·ξ.

    `backward(weights)` accumulates into trainable encoder/decoder grads and
    returns d loss / d x.
    """

    def __init__(self, vae: VaeModel, x: Matrix, xi: Matrix, kl_weight: float, track: bool):
        self.vae = vae
        self.x = x
        self.xi = xi
        self.kl_weight = kl_weight
        self._tracked = track

        run_enc = vae.encoder.forward if track else vae.encoder.predict
        run_dec = vae.decoder.forward if track else vae.decoder.predict
        stats = run_enc(x)
        self.mu = stats[:, :vae.latent_dim]
        self.logvar = stats[:, vae.latent_dim:]
        self.std = np.exp(0.5 * self.logvar)
        self.x_hat = run_dec(self.mu + self.std * xi)
        diff = self.x_hat - x
        self.recon = np.sum(diff * diff, axis=1)
        self.kl = kl_to_standard_normal(self.mu, self.logvar)
        self.per_sample = self.recon + kl_weight * self.kl
        self.value = float(np.mean(self.per_sample))

    def backward(self, weights: Optional[np.ndarray] = None) -> Matrix:
        if not self._tracked:
            raise StateError("This VAE loss term was computed detached")
        rows = self.x.shape[0]
        if weights is None:
            weights = np.full(rows, 1.0 / rows)
        w = np.asarray(weights, dtype=np.float64)[:, None]
        d_x_hat = 2.0 * (self.x_hat - self.x) * w
        d_z = self.vae.decoder.backward(d_x_hat)
        d_mu = d_z + self.kl_weight * self.mu * w
        d_logvar = d_z * self.xi * 0.5 * self.std + self.kl_weight * 0.5 * (np.exp(self.logvar) - 1.0) * w
        d_x = self.vae.encoder.backward(np.hstack([d_mu, d_logvar]))
        self._tracked = False
        return d_x - d_x_hat


def vae_loss(vae: VaeModel, x: Matrix, xi: Matrix, kl_weight: float = 1.0, track: bool = True) -> VaeLossTerm:
    x = as_matrix(x, cols=vae.state_dim + vae.action_dim, name="joint batch")
    xi = as_matrix(xi, cols=vae.latent_dim, name="latent noise")
    if xi.shape[0] != x.shape[0]:
        raise ShapeError("Latent noise rows must match the batch")
    return VaeLossTerm(vae, x, xi, kl_weight, track)


def train_vae(dataset: DemoDataset, cfg: TrainConfig, rng: Rng) -> VaeModel:
    dataset.require_nonempty()
    data = dataset.joint()
    vae = VaeModel.build(dataset.state_dim, dataset.action_dim, cfg.latent_dim, cfg.vae_hidden_dim,
                         cfg.vae_num_layers, rng.spawn("init"), norm=dataset.norm_stats)
    enc_opt = AdamState.for_model(vae.encoder, cfg.vae_lr)
    dec_opt = AdamState.for_model(vae.decoder, cfg.vae_lr)
    batch_rng, noise_rng = rng.spawn("batches"), rng.spawn("latent")

    logger.info(f"🚀 Training VAE (latent {cfg.latent_dim}) for {cfg.vae_epochs} epochs")
    loss = float("nan")
    for epoch in range(cfg.vae_epochs):
        lr = scheduled_lr("step", cfg.vae_lr, epoch, cfg.vae_epochs, cfg.vae_decay_factor, cfg.vae_decay_every)
        enc_opt.lr = dec_opt.lr = lr
        for idx in minibatches(batch_rng.permutation(len(dataset)), cfg.batch_size):
            term = vae_loss(vae, data[idx], noise_rng.gaussian(idx.size, cfg.latent_dim), cfg.kl_weight)
            term.backward()
            adam_step(vae.encoder, enc_opt)
            adam_step(vae.decoder, dec_opt)
            loss = term.value
        if (epoch + 1) % cfg.log_every == 0 or epoch + 1 == cfg.vae_epochs:
            check_finite(loss, f"VAE loss at epoch {epoch + 1}")
            logger.info(f"   [vae] epoch {epoch + 1}/{cfg.vae_epochs} loss={loss:.6f}")
    return vae.freeze()


def vae_guidance_loss(vae: VaeModel, policy: Optional[Policy], batch_states: Matrix, batch_actions: Matrix,
                      xi: Matrix, kl_weight: float = 1.0,
                      predicted_actions: Optional[Matrix] = None) -> Tuple[float, Matrix]:
    """
    max(L_vae(s, π(s)) − L_vae(s, a), 0) averaged over the batch, with the same
    latent noise ξ for both terms. Returns the loss and d loss / d π(s).
    """
    if predicted_actions is None:
        predicted_actions = policy.net.forward(as_matrix(batch_states, cols=policy.state_dim))
    states = as_matrix(batch_states)
    expert = vae_loss(vae, np.hstack([states, as_matrix(batch_actions)]), xi, kl_weight, track=False)
    agent = vae_loss(vae, np.hstack([states, as_matrix(predicted_actions)]), xi, kl_weight, track=True)
    value, weights = dm_loss(agent.per_sample, expert.per_sample)
    d_joint = agent.backward(weights)
    return value, d_joint[:, vae.state_dim:]


def train_vae_guided_policy(vae: VaeModel, dataset: DemoDataset, cfg: TrainConfig, rng: Rng) -> Policy:
    def guide(states, actions, pred, guide_rng):
        xi = guide_rng.gaussian(states.shape[0], vae.latent_dim)
        return vae_guidance_loss(vae, None, states, actions, xi, cfg.kl_weight, predicted_actions=pred)

    return fit_guided_policy(dataset, guide, cfg.lambda_vae, guided_policy_config(cfg), rng, tag="vae")
