"""
Energy-based modelling of expert pairs: InfoNCE training against uniform random
actions, energy guidance for a regression policy, and derivative-free
sample-and-resample inference.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from src.dbc.models import Policy
from src.diffusion.trainer import minibatches
from src.guidance.guided import fit_guided_policy, guided_policy_config
from src.guidance.models import EnergyFunction, EnergyModel
from src.harness.config import TrainConfig
from src.harness.dataset import DemoDataset, NormStats, apply_norm, invert_norm
from src.numcore import AdamState, Matrix, Rng, adam_step, as_matrix, check_finite, scheduled_lr
from src.numcore.losses import logsumexp, softmax

logger = logging.getLogger(__name__)

IBC_NOISE_SCALES = (0.33, 0.11, 0.037)


def sample_negatives(rng: Rng, batch: int, n_neg: int, action_dim: int,
                     low: float, high: float, norm: NormStats) -> np.ndarray:
    """Uniform random actions over the raw action box, returned normalized, shape (B, K, A)."""
    raw = rng.uniform(low, high, batch * n_neg, action_dim)
    return apply_norm(raw, norm.actions).reshape(batch, n_neg, action_dim)


def infonce_loss(ebm: EnergyModel, states: Matrix, actions: Matrix,
                 negatives: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    InfoNCE with the expert action as the positive among K negatives.

    Runs a cached forward on the (B·(K+1)) stacked pairs and returns the loss and
    d loss / d energy with shape (B·(K+1), 1), ready for `ebm.net.backward`.
    """
    states = as_matrix(states, cols=ebm.state_dim, name="states")
    actions = as_matrix(actions, cols=ebm.action_dim, name="actions")
    batch, k, _ = negatives.shape
    candidates = np.concatenate([actions[:, None, :], negatives], axis=1)  # (B, K+1, A)
    rep_states = np.repeat(states, k + 1, axis=0)
    energies = ebm.net.forward(np.hstack([rep_states, candidates.reshape(batch * (k + 1), -1)]))
    energies = energies.reshape(batch, k + 1)

    logits = -energies
    loss = float(np.mean(energies[:, 0] + logsumexp(logits, axis=1)))
    d_energies = softmax(logits, axis=1) * -1.0
    d_energies[:, 0] += 1.0
    return loss, (d_energies / batch).reshape(-1, 1)


def train_ebm(dataset: DemoDataset, cfg: TrainConfig, rng: Rng) -> EnergyModel:
    dataset.require_nonempty()
    states, actions = dataset.normalized()
    ebm = EnergyModel.build(dataset.state_dim, dataset.action_dim, cfg.ebm_hidden_dim,
                            cfg.ebm_num_layers, rng.spawn("init"), norm=dataset.norm_stats)
    opt = AdamState.for_model(ebm.net, cfg.ebm_lr)
    batch_rng, neg_rng = rng.spawn("batches"), rng.spawn("negatives")

    logger.info(f"🚀 Training EBM with {cfg.n_neg} negatives per pair for {cfg.ebm_epochs} epochs")
    loss = float("nan")
    for epoch in range(cfg.ebm_epochs):
        opt.lr = scheduled_lr("step", cfg.ebm_lr, epoch, cfg.ebm_epochs, cfg.ebm_decay_factor, cfg.ebm_decay_every)
        for idx in minibatches(batch_rng.permutation(len(dataset)), cfg.batch_size):
            negatives = sample_negatives(neg_rng, idx.size, cfg.n_neg, dataset.action_dim,
                                         cfg.action_low, cfg.action_high, dataset.norm_stats)
            loss, d_energy = infonce_loss(ebm, states[idx], actions[idx], negatives)
            ebm.net.backward(d_energy)
            adam_step(ebm.net, opt)
        if (epoch + 1) % cfg.log_every == 0 or epoch + 1 == cfg.ebm_epochs:
            check_finite(loss, f"InfoNCE loss at epoch {epoch + 1}")
            logger.info(f"   [ebm] epoch {epoch + 1}/{cfg.ebm_epochs} loss={loss:.6f}")
    return ebm.freeze()


def ebm_guidance_loss(ebm: EnergyFunction, policy: Policy, batch_states: Matrix,
                      predicted_actions: Optional[Matrix] = None) -> Tuple[float, Matrix]:
    """Mean energy of (s, π(s)) and its gradient w.r.t. π(s)."""
    if predicted_actions is None:
        predicted_actions = policy.net.forward(as_matrix(batch_states, cols=policy.state_dim))
    energies, d_actions = ebm.energy_and_grad(batch_states, predicted_actions)
    rows = energies.shape[0]
    return float(np.mean(energies)), np.asarray(d_actions) / rows


def train_ebm_guided_policy(ebm: EnergyModel, dataset: DemoDataset, cfg: TrainConfig, rng: Rng) -> Policy:
    def guide(states, actions, pred, _rng):
        return ebm_guidance_loss(ebm, None, states, predicted_actions=pred)

    return fit_guided_policy(dataset, guide, cfg.lambda_ebm, guided_policy_config(cfg), rng, tag="ebm")


def act_ibc(ebm: EnergyFunction, state, rng: Rng, n_samples: int = 1000, n_iters: int = 3,
            low: float = -1.0, high: float = 1.0, noise_scales: Sequence[float] = IBC_NOISE_SCALES,
            temperature: float = 1.0) -> np.ndarray:
    """
    Derivative-free inference over the action box.

    Draw candidates uniformly, then `n_iters` times: weight them by softmax of
    negated energies, resample with replacement, perturb with shrinking Gaussian
    noise and clip to the box. Returns the most probable final candidate.
    When the energy model carries normalization stats, `state` and the result are
    raw and the search runs in normalized coordinates.
    """
    norm = getattr(ebm, "norm", None)
    state = np.asarray(state, dtype=np.float64).reshape(1, -1)
    low_v = np.full(ebm.action_dim, low, dtype=np.float64)
    high_v = np.full(ebm.action_dim, high, dtype=np.float64)
    if norm is not None:
        state = apply_norm(state, norm.states)
        low_v = apply_norm(low_v, norm.actions)
        high_v = apply_norm(high_v, norm.actions)
    half_width = (high_v - low_v) / 2.0
    states = np.repeat(state, n_samples, axis=0)

    candidates = rng.uniform(low_v, high_v, n_samples, ebm.action_dim)
    for it in range(n_iters):
        probs = softmax(-ebm.energy(states, candidates) / temperature)
        idx = rng.choice(probs, n_samples)
        scale = noise_scales[min(it, len(noise_scales) - 1)]
        candidates = candidates[idx] + scale * half_width * rng.gaussian(n_samples, ebm.action_dim)
        candidates = np.clip(candidates, low_v, high_v)
    probs = softmax(-ebm.energy(states, candidates) / temperature)
    best = candidates[int(np.argmax(probs))]
    if norm is not None:
        best = invert_norm(best, norm.actions)
    return best
