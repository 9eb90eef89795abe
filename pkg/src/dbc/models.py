from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator

from src.errors import ConfigError
from src.harness.config import TrainConfig
from src.harness.dataset import NormStats, apply_norm, invert_norm
from src.numcore import MlpModel, Rng, as_matrix


class DbcConfig(BaseModel):
    """Policy-learning knobs for the combined BC + diffusion objective."""
    lam: float = Field(default=30.0, description="Importance of L_DM relative to L_BC")
    use_expert_normalization: bool = True
    share_noise_between_terms: bool = True
    use_bc_loss: bool = True
    epochs: int = Field(default=2000, ge=0)
    batch_size: int = Field(default=128, ge=1)
    lr: float = Field(default=5e-5, gt=0.0)
    lr_decay: str = "linear"
    decay_factor: float = 0.5
    decay_every: int = 1000
    hidden_dim: int = 256
    num_layers: int = 4
    activation: str = "tanh"
    log_every: int = 100

    def __init__(self, **data):
        try:
            super().__init__(**data)
        except ValidationError as e:
            raise ConfigError(f"Invalid policy config: {e}") from e

    @field_validator("lam")
    @classmethod
    def _check_lambda(cls, value):
        if value < 0:
            raise ValueError("lambda must be non-negative")
        return value

    @classmethod
    def from_train_config(cls, cfg: TrainConfig) -> "DbcConfig":
        return cls(
            lam=cfg.lam,
            use_expert_normalization=cfg.use_expert_normalization,
            share_noise_between_terms=cfg.share_noise,
            use_bc_loss=cfg.use_bc_loss,
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            lr=cfg.lr,
            lr_decay=cfg.lr_decay,
            decay_factor=cfg.decay_factor,
            decay_every=cfg.decay_every,
            hidden_dim=cfg.hidden_dim,
            num_layers=cfg.num_layers,
            activation=cfg.activation,
            log_every=cfg.log_every,
        )


class Policy:
    """
    Deterministic state -> action regressor.

    The network works in normalized coordinates; when `norm` is set, `act`
    normalizes raw states and maps outputs back to raw actions.
    """

    def __init__(self, net: MlpModel, state_dim: int, action_dim: int, norm: Optional[NormStats] = None):
        self.net = net
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.norm = norm

    @classmethod
    def build(cls, state_dim: int, action_dim: int, hidden_dim: int, num_layers: int,
              activation: str, rng: Rng, norm: Optional[NormStats] = None) -> "Policy":
        dims = [state_dim] + [hidden_dim] * (num_layers - 1) + [action_dim]
        return cls(MlpModel.initialize(dims, activation, rng), state_dim, action_dim, norm)

    def predict(self, states) -> np.ndarray:
        """Batched normalized-space prediction without caching."""
        return self.net.predict(as_matrix(states, cols=self.state_dim, name="states"))


def act(policy: Policy, state) -> np.ndarray:
    """Single forward pass on one raw state."""
    s = as_matrix(np.asarray(state, dtype=np.float64).reshape(1, -1), cols=policy.state_dim, name="state")
    if policy.norm is not None:
        s = apply_norm(s, policy.norm.states)
    a = policy.net.predict(s)
    if policy.norm is not None:
        a = invert_norm(a, policy.norm.actions)
    return a[0]
