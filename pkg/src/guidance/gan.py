import logging
from typing import Tuple

import numpy as np

from src.dbc.models import Policy
from src.diffusion.trainer import minibatches
from src.guidance.models import GanPair, _mlp_dims
from src.harness.config import TrainConfig
from src.harness.dataset import DemoDataset
from src.numcore import AdamState, MlpModel, Rng, adam_step, check_finite, frozen, scheduled_lr
from src.numcore.losses import bce_with_logits, mse_loss

logger = logging.getLogger(__name__)


def disc_loss(real_logits: np.ndarray, fake_logits: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    −log D(s, a) − log(1 − D(s, â)) on logits, each half averaged over its rows.

    Returns the loss and its gradients w.r.t. the real and fake logits.
    """
    real_logits = np.asarray(real_logits, dtype=np.float64)
    fake_logits = np.asarray(fake_logits, dtype=np.float64)
    real_value, d_real = bce_with_logits(real_logits, np.ones_like(real_logits))
    fake_value, d_fake = bce_with_logits(fake_logits, np.zeros_like(fake_logits))
    return real_value + fake_value, d_real, d_fake


def generator_loss(fake_logits: np.ndarray) -> Tuple[float, np.ndarray]:
    """−log D(s, â) averaged over rows, with d loss / d logits."""
    fake_logits = np.asarray(fake_logits, dtype=np.float64)
    return bce_with_logits(fake_logits, np.ones_like(fake_logits))


def build_gan(dataset: DemoDataset, cfg: TrainConfig, rng: Rng) -> GanPair:
    generator = Policy.build(dataset.state_dim, dataset.action_dim, cfg.gan_hidden_dim, cfg.gan_num_layers,
                             "relu", rng.spawn("generator"), norm=dataset.norm_stats)
    dims = _mlp_dims(dataset.state_dim + dataset.action_dim, cfg.gan_hidden_dim, cfg.gan_num_layers, 1)
    discriminator = MlpModel.initialize(dims, "leaky_relu", rng.spawn("discriminator"))
    return GanPair(generator, discriminator)


def train_gan_bc(dataset: DemoDataset, cfg: TrainConfig, rng: Rng) -> GanPair:
    """
    Alternate one discriminator and one generator update per batch.

    The generator minimizes L_BC + λ_GAN · (−log D(s, â)), or the adversarial
    term alone when `use_bc_loss` is off.
    """
    dataset.require_nonempty()
    states, actions = dataset.normalized()
    gan = build_gan(dataset, cfg, rng.spawn("init"))
    gen, disc = gan.generator.net, gan.discriminator
    gen_opt = AdamState.for_model(gen, cfg.gan_lr)
    disc_opt = AdamState.for_model(disc, cfg.gan_lr)
    batch_rng = rng.spawn("batches")

    logger.info(f"🚀 Training GAN policy (λ={cfg.lambda_gan}, bc={cfg.use_bc_loss}) for {cfg.epochs} epochs")
    d_value = g_value = float("nan")
    for epoch in range(cfg.epochs):
        gen_opt.lr = scheduled_lr(cfg.lr_decay, cfg.gan_lr, epoch, cfg.epochs, cfg.decay_factor, cfg.decay_every)
        for idx in minibatches(batch_rng.permutation(len(dataset)), cfg.batch_size):
            s, a = states[idx], actions[idx]
            pred = gen.forward(s)

            logits = disc.forward(np.vstack([np.hstack([s, a]), np.hstack([s, pred])]))
            d_value, d_real, d_fake = disc_loss(logits[:idx.size], logits[idx.size:])
            disc.backward(np.vstack([d_real, d_fake]))
            adam_step(disc, disc_opt)

            with frozen(disc):
                fake_logits = disc.forward(np.hstack([s, pred]))
                adv_value, d_logits = generator_loss(fake_logits)
                d_adv = disc.backward(d_logits)[:, dataset.state_dim:]
            bc_value, d_bc = mse_loss(pred, a) if cfg.use_bc_loss else (0.0, np.zeros_like(pred))
            g_value = bc_value + cfg.lambda_gan * adv_value
            gen.backward(d_bc + cfg.lambda_gan * d_adv)
            adam_step(gen, gen_opt)
        if (epoch + 1) % cfg.log_every == 0 or epoch + 1 == cfg.epochs:
            check_finite(g_value, f"generator loss at epoch {epoch + 1}")
            check_finite(d_value, f"discriminator loss at epoch {epoch + 1}")
            logger.info(f"   [gan] epoch {epoch + 1}/{cfg.epochs} gen={g_value:.6f} disc={d_value:.6f}")
    gan.discriminator.freeze()
    return gan
