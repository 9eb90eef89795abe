"""
Conditional diffusion policy: noise only the action given the clean state, act
by running the full reverse chain.
"""
import logging
from typing import Optional, Tuple

import numpy as np

from src.diffusion.schedule import NoiseLevel
from src.diffusion.trainer import minibatches, schedule_from_config
from src.errors import ShapeError
from src.guidance.models import CondDiffusionPolicy
from src.harness.config import TrainConfig
from src.harness.dataset import DemoDataset, apply_norm, invert_norm
from src.numcore import AdamState, Matrix, Rng, adam_step, as_matrix, check_finite
from src.numcore.losses import mse_loss

logger = logging.getLogger(__name__)


def dp_loss(dp: CondDiffusionPolicy, states: Matrix, actions: Matrix, n: NoiseLevel,
            eps: Matrix) -> Tuple[float, Matrix]:
    """Noise-prediction MSE on the action slice; leaves the network's activations cached."""
    actions = as_matrix(actions, cols=dp.action_dim, name="actions")
    eps = as_matrix(eps, cols=dp.action_dim, name="eps")
    if eps.shape != actions.shape:
        raise ShapeError(f"eps {eps.shape} does not match actions {actions.shape}")
    ab = np.broadcast_to(dp.sched.at(dp.sched.alpha_bar, n), (actions.shape[0],))[:, None]
    noisy = np.sqrt(ab) * actions + np.sqrt(1.0 - ab) * eps
    eps_hat = dp.net.forward(dp.inputs(states, noisy, n))
    return mse_loss(eps_hat, eps)


def train_diffusion_policy(dataset: DemoDataset, cfg: TrainConfig, rng: Rng) -> CondDiffusionPolicy:
    dataset.require_nonempty()
    states, actions = dataset.normalized()
    sched = schedule_from_config(cfg)
    dp = CondDiffusionPolicy.build(dataset.state_dim, dataset.action_dim, sched, cfg.dp_hidden_dim,
                                   cfg.dp_num_layers, rng.spawn("init"), norm=dataset.norm_stats)
    opt = AdamState.for_model(dp.net, cfg.dp_lr)
    batch_rng, noise_rng = rng.spawn("batches"), rng.spawn("noise")

    logger.info(f"🚀 Training diffusion policy (N={sched.N}) for {cfg.dp_epochs} epochs")
    loss = float("nan")
    for epoch in range(cfg.dp_epochs):
        for idx in minibatches(batch_rng.permutation(len(dataset)), cfg.batch_size):
            n = noise_rng.integers(1, sched.N + 1, idx.size)
            eps = noise_rng.gaussian(idx.size, dataset.action_dim)
            loss, d_eps_hat = dp_loss(dp, states[idx], actions[idx], n, eps)
            dp.net.backward(d_eps_hat)
            adam_step(dp.net, opt)
        if (epoch + 1) % cfg.log_every == 0 or epoch + 1 == cfg.dp_epochs:
            check_finite(loss, f"diffusion policy loss at epoch {epoch + 1}")
            logger.info(f"   [dp] epoch {epoch + 1}/{cfg.dp_epochs} loss={loss:.6f}")
    return dp


def act_diffusion_policy(dp: CondDiffusionPolicy, state, rng: Rng, deterministic: bool = False,
                         a_N: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Denoise an action for one raw state from a_N ~ N(0, I) over all N levels.

    `deterministic` drops the σ_n·z term so the result depends only on (state, a_N).
    """
    s = np.asarray(state, dtype=np.float64).reshape(1, -1)
    if dp.norm is not None:
        s = apply_norm(s, dp.norm.states)
    sched = dp.sched
    a = rng.gaussian(1, dp.action_dim) if a_N is None else np.asarray(a_N, dtype=np.float64).reshape(1, -1).copy()
    for n in range(sched.N, 0, -1):
        alpha, alpha_bar = sched.alpha[n - 1], sched.alpha_bar[n - 1]
        eps_hat = dp.net.predict(dp.inputs(s, a, n))
        a = (a - (1.0 - alpha) / np.sqrt(1.0 - alpha_bar) * eps_hat) / np.sqrt(alpha)
        if n > 1 and not deterministic:
            a = a + sched.sigma[n - 1] * rng.gaussian(1, dp.action_dim)
    if dp.norm is not None:
        a = invert_norm(a, dp.norm.actions)
    return a[0]
