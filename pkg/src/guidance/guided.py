import logging
from typing import Callable, Tuple

import numpy as np

from src.dbc.models import DbcConfig, Policy
from src.dbc.trainer import init_policy
from src.diffusion.trainer import minibatches
from src.harness.config import TrainConfig
from src.harness.dataset import DemoDataset
from src.numcore import Matrix, Rng, adam_step, check_finite, scheduled_lr
from src.numcore.losses import mse_loss

logger = logging.getLogger(__name__)

# (states, actions, predicted actions, rng) -> (guidance loss, d loss / d predicted actions)
GuidanceFn = Callable[[Matrix, Matrix, Matrix, Rng], Tuple[float, Matrix]]


def guided_policy_config(cfg: TrainConfig) -> DbcConfig:
    """Policies guided by EBM / VAE / GAN use the shallow ReLU architecture."""
    return DbcConfig.from_train_config(cfg).model_copy(update={
        "hidden_dim": cfg.guide_hidden_dim,
        "num_layers": cfg.guide_num_layers,
        "activation": "relu",
    })


def fit_guided_policy(dataset: DemoDataset, guide: GuidanceFn, lam: float, cfg: DbcConfig,
                      rng: Rng, tag: str = "guided") -> Policy:
    """Minimize L_BC + lam * guidance (or guidance alone when BC is disabled)."""
    dataset.require_nonempty()
    states, actions = dataset.normalized()
    policy, opt = init_policy(dataset, cfg, rng)
    batch_rng, guide_rng = rng.spawn("batches"), rng.spawn("guide")

    logger.info(f"🚀 Training {tag} policy (λ={lam}, bc={cfg.use_bc_loss}) for {cfg.epochs} epochs")
    total = float("nan")
    for epoch in range(cfg.epochs):
        opt.lr = scheduled_lr(cfg.lr_decay, cfg.lr, epoch, cfg.epochs, cfg.decay_factor, cfg.decay_every)
        for idx in minibatches(batch_rng.permutation(len(dataset)), cfg.batch_size):
            pred = policy.net.forward(states[idx])
            bc_value, d_pred = mse_loss(pred, actions[idx])
            if not cfg.use_bc_loss:
                bc_value, d_pred = 0.0, np.zeros_like(pred)
            g_value, d_guide = guide(states[idx], actions[idx], pred, guide_rng)
            total = bc_value + lam * g_value
            policy.net.backward(d_pred + lam * d_guide)
            adam_step(policy.net, opt)
        if (epoch + 1) % cfg.log_every == 0 or epoch + 1 == cfg.epochs:
            check_finite(total, f"{tag} loss at epoch {epoch + 1}")
            logger.info(f"   [{tag}] epoch {epoch + 1}/{cfg.epochs} loss={total:.6f}")
    return policy
