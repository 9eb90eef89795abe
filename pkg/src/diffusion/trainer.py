import logging
import time

import numpy as np

from src.diffusion.model import NoiseModel, diff_loss
from src.diffusion.schedule import DiffusionSchedule, scaled_schedule
from src.harness.config import TrainConfig
from src.harness.dataset import DemoDataset
from src.numcore import AdamState, Rng, adam_step, check_finite, scheduled_lr

logger = logging.getLogger(__name__)


def schedule_from_config(cfg: TrainConfig) -> DiffusionSchedule:
    return scaled_schedule(cfg.n_steps, cfg.beta_start, cfg.beta_end, cfg.beta_reference_steps)


def minibatches(order: np.ndarray, batch_size: int):
    for start in range(0, order.size, batch_size):
        yield order[start:start + batch_size]


def train_diffusion(dataset: DemoDataset, cfg: TrainConfig, rng: Rng) -> NoiseModel:
    """
    Fit the noise predictor on normalized expert (s, a) pairs.

    Each step: sample a batch, a level n ~ U{1..N} and ε ~ N(0, I) per row,
    minimize the noise-prediction MSE with Adam. With `noise_level > 0` the
    expert actions get fresh Gaussian noise of that scale (in raw action units)
    every batch. Returns the trained model frozen.
    """
    dataset.require_nonempty()
    sched = schedule_from_config(cfg)
    phi = NoiseModel.build(
        dataset.state_dim, dataset.action_dim, sched,
        cfg.dm_hidden_dim, cfg.dm_num_layers, cfg.dm_activation, rng.spawn("init"),
    )
    phi.metadata.update({"noise_level": cfg.noise_level, "n_steps": sched.N})

    data = dataset.joint()
    action_std = np.asarray(dataset.norm_stats.actions.std)
    s_dim = dataset.state_dim
    batch_rng, noise_rng = rng.spawn("batches"), rng.spawn("noise")
    opt = AdamState.for_model(phi.net, cfg.dm_lr)

    logger.info(f"🚀 Training diffusion model on {len(dataset)} pairs for {cfg.dm_epochs} epochs "
                f"(N={sched.N}, noise_level={cfg.noise_level})")
    start = time.perf_counter()
    loss = float("nan")
    for epoch in range(cfg.dm_epochs):
        opt.lr = scheduled_lr(cfg.dm_lr_decay, cfg.dm_lr, epoch, cfg.dm_epochs, cfg.dm_decay_factor,
                              cfg.dm_decay_every)
        for idx in minibatches(batch_rng.permutation(len(dataset)), cfg.dm_batch_size):
            x0 = data[idx]
            if cfg.noise_level > 0:
                x0 = x0.copy()
                x0[:, s_dim:] += cfg.noise_level * noise_rng.gaussian(idx.size, dataset.action_dim) / action_std
            n = noise_rng.integers(1, sched.N + 1, idx.size)
            eps = noise_rng.gaussian(idx.size, phi.dim)
            term = diff_loss(phi, x0, n, eps, sched)
            term.backward()
            adam_step(phi.net, opt)
            loss = term.value
        if (epoch + 1) % cfg.log_every == 0 or epoch + 1 == cfg.dm_epochs:
            check_finite(loss, f"diffusion loss at epoch {epoch + 1}")
            logger.info(f"   [dm] epoch {epoch + 1}/{cfg.dm_epochs} loss={loss:.6f}")

    logger.info(f"✅ Diffusion model trained in {time.perf_counter() - start:.1f}s")
    return phi.freeze()
