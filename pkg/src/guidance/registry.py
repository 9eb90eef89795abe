"""
Name -> (trainer, actor factory) for every imitation method the harness can run.

Trainers share the signature `(dataset, cfg, rng, phi=None)`; actor factories turn
the trained artifact into `actor(observation, env_state, rng) -> raw action`.
"""
import logging
from typing import Any, Callable, Dict, NamedTuple, Optional

from src.dbc.models import DbcConfig, act
from src.dbc.trainer import train_bc, train_policy
from src.diffusion.model import NoiseModel
from src.errors import ConfigError, UsageError
from src.guidance.diffusion_policy import act_diffusion_policy, train_diffusion_policy
from src.guidance.ebm import act_ibc, train_ebm, train_ebm_guided_policy
from src.guidance.gan import train_gan_bc
from src.guidance.vae import train_vae, train_vae_guided_policy
from src.harness.config import TrainConfig
from src.harness.dataset import DemoDataset
from src.numcore import Rng

logger = logging.getLogger(__name__)

Actor = Callable[[Any, Any, Rng], Any]


class Method(NamedTuple):
    name: str
    train: Callable[..., Any]
    make_actor: Callable[[Any, TrainConfig], Actor]
    needs_diffusion_model: bool = False


def _policy_actor(policy, cfg: TrainConfig) -> Actor:
    return lambda obs, state, rng: act(policy, obs)


def _train_bc(dataset: DemoDataset, cfg: TrainConfig, rng: Rng, phi: Optional[NoiseModel] = None):
    return train_bc(dataset, DbcConfig.from_train_config(cfg), rng)


def _train_dbc(dataset: DemoDataset, cfg: TrainConfig, rng: Rng, phi: Optional[NoiseModel] = None):
    if phi is None:
        raise UsageError("DBC needs a trained diffusion model")
    return train_policy(dataset, phi, DbcConfig.from_train_config(cfg), rng)


def _train_ibc(dataset, cfg, rng, phi=None):
    return train_ebm(dataset, cfg, rng)


def _ibc_actor(ebm, cfg: TrainConfig) -> Actor:
    def actor(obs, state, rng):
        return act_ibc(ebm, obs, rng, n_samples=cfg.ibc_samples, n_iters=cfg.ibc_iters,
                       low=cfg.action_low, high=cfg.action_high)
    return actor


def _train_dp(dataset, cfg, rng, phi=None):
    return train_diffusion_policy(dataset, cfg, rng)


def _dp_actor(dp, cfg: TrainConfig) -> Actor:
    return lambda obs, state, rng: act_diffusion_policy(dp, obs, rng)


def _train_ebm_guided(dataset, cfg, rng, phi=None):
    ebm = train_ebm(dataset, cfg, rng.spawn("ebm"))
    return train_ebm_guided_policy(ebm, dataset, cfg, rng.spawn("policy"))


def _train_vae_guided(dataset, cfg, rng, phi=None):
    vae = train_vae(dataset, cfg, rng.spawn("vae"))
    return train_vae_guided_policy(vae, dataset, cfg, rng.spawn("policy"))


def _train_gan(dataset, cfg, rng, phi=None):
    return train_gan_bc(dataset, cfg, rng).generator


METHODS: Dict[str, Method] = {
    "bc": Method("bc", _train_bc, _policy_actor),
    "ibc": Method("ibc", _train_ibc, _ibc_actor),
    "dp": Method("dp", _train_dp, _dp_actor),
    "ebm": Method("ebm", _train_ebm_guided, _policy_actor),
    "vae": Method("vae", _train_vae_guided, _policy_actor),
    "gan": Method("gan", _train_gan, _policy_actor),
    "dbc": Method("dbc", _train_dbc, _policy_actor, needs_diffusion_model=True),
}


def get_method(name: str) -> Method:
    try:
        return METHODS[name]
    except KeyError:
        raise ConfigError(f"Unknown method '{name}'. Available: {', '.join(METHODS)}") from None


def train_method(name: str, dataset: DemoDataset, cfg: TrainConfig, rng: Rng,
                 phi: Optional[NoiseModel] = None):
    method = get_method(name)
    logger.info(f"🔍 Training method '{name}' on {len(dataset)} pairs")
    return method.train(dataset, cfg, rng, phi=phi)
