import logging
import time
from typing import Tuple

import numpy as np

from src.dbc.losses import bc_loss, dbc_objective
from src.dbc.models import DbcConfig, Policy
from src.diffusion.model import NoiseModel
from src.diffusion.trainer import minibatches
from src.errors import ConfigError, UsageError
from src.harness.dataset import DemoDataset
from src.numcore import AdamState, Rng, adam_step, check_finite, scheduled_lr

logger = logging.getLogger(__name__)


def init_policy(dataset: DemoDataset, cfg: DbcConfig, rng: Rng) -> Tuple[Policy, AdamState]:
    """Policy and optimizer drawn from the run's `init` stream."""
    policy = Policy.build(
        dataset.state_dim, dataset.action_dim, cfg.hidden_dim, cfg.num_layers,
        cfg.activation, rng.spawn("init"), norm=dataset.norm_stats,
    )
    return policy, AdamState.for_model(policy.net, cfg.lr)


def _log_epoch(tag: str, epoch: int, cfg: DbcConfig, value: float, extra: str = ""):
    if (epoch + 1) % cfg.log_every == 0 or epoch + 1 == cfg.epochs:
        check_finite(value, f"{tag} loss at epoch {epoch + 1}")
        logger.info(f"   [{tag}] epoch {epoch + 1}/{cfg.epochs} loss={value:.6f}{extra}")


def train_bc(dataset: DemoDataset, cfg: DbcConfig, rng: Rng) -> Policy:
    """Plain behavioral cloning: minimize the MSE between π(s) and expert a."""
    dataset.require_nonempty()
    states, actions = dataset.normalized()
    policy, opt = init_policy(dataset, cfg, rng)
    batch_rng = rng.spawn("batches")

    logger.info(f"🚀 Training BC policy on {len(dataset)} pairs for {cfg.epochs} epochs")
    loss = float("nan")
    for epoch in range(cfg.epochs):
        opt.lr = scheduled_lr(cfg.lr_decay, cfg.lr, epoch, cfg.epochs, cfg.decay_factor, cfg.decay_every)
        for idx in minibatches(batch_rng.permutation(len(dataset)), cfg.batch_size):
            loss, d_pred = bc_loss(policy, states[idx], actions[idx])
            policy.net.backward(d_pred)
            adam_step(policy.net, opt)
        _log_epoch("bc", epoch, cfg, loss)
    return policy


def train_policy(dataset: DemoDataset, phi: NoiseModel, cfg: DbcConfig, rng: Rng) -> Policy:
    """
    Policy learning guided by a frozen diffusion model.

    Per batch: predict â = π(s), compute L_BC, draw (n, ε) per sample, compute the
    agent and expert diffusion losses, clamp their difference into L_DM and take
    an Adam step on π for L_BC + λ·L_DM. φ is never updated.
    """
    if cfg.lam < 0:
        raise ConfigError(f"lambda must be non-negative, got {cfg.lam}")
    if phi.net.trainable:
        raise UsageError("Freeze the diffusion model before policy training")
    dataset.require_nonempty()
    states, actions = dataset.normalized()
    sched = phi.sched
    policy, opt = init_policy(dataset, cfg, rng)
    batch_rng, noise_rng = rng.spawn("batches"), rng.spawn("noise")

    mode = "DBC" if cfg.use_bc_loss else "DM-only"
    logger.info(f"🚀 Training {mode} policy on {len(dataset)} pairs for {cfg.epochs} epochs "
                f"(λ={cfg.lam}, expert_norm={cfg.use_expert_normalization}, "
                f"shared_noise={cfg.share_noise_between_terms})")
    start = time.perf_counter()
    value = None
    for epoch in range(cfg.epochs):
        opt.lr = scheduled_lr(cfg.lr_decay, cfg.lr, epoch, cfg.epochs, cfg.decay_factor, cfg.decay_every)
        for idx in minibatches(batch_rng.permutation(len(dataset)), cfg.batch_size):
            n = eps = expert_n = expert_eps = None
            if cfg.lam != 0.0:
                n = noise_rng.integers(1, sched.N + 1, idx.size)
                eps = noise_rng.gaussian(idx.size, phi.dim)
                if not cfg.share_noise_between_terms:
                    expert_n = noise_rng.integers(1, sched.N + 1, idx.size)
                    expert_eps = noise_rng.gaussian(idx.size, phi.dim)
            value, d_pred = dbc_objective(
                policy, phi, states[idx], actions[idx], n, eps, sched, cfg.lam,
                use_expert_normalization=cfg.use_expert_normalization,
                use_bc_loss=cfg.use_bc_loss,
                expert_n=expert_n, expert_eps=expert_eps,
            )
            policy.net.backward(d_pred)
            adam_step(policy.net, opt)
        if value is not None:
            _log_epoch("dbc", epoch, cfg, value.total, f" (bc={value.bc:.6f} dm={value.dm:.6f})")

    logger.info(f"✅ Policy trained in {time.perf_counter() - start:.1f}s")
    return policy
