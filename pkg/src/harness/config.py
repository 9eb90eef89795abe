"""
Run configuration: a flat `key = value` file validated into TrainConfig.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from src.config import settings
from src.errors import ConfigError
from src.utils import PathLike, digest_text

logger = logging.getLogger(__name__)

ROLES = ("dm", "policy", "dbc", "bc", "ibc", "dp", "ebm", "vae", "gan")
_LIST_FIELDS = ("sweep_lambdas", "sweep_seeds", "fractions", "noise_levels", "compare_methods", "field_dims")


class TrainConfig(BaseModel):
    """Every tunable of a run. Defaults follow the Maze column of the reference hyperparameters."""
    role: str = Field(default="dbc", description="dm | policy | baseline name")
    env: str = Field(default="maze", pattern="^(maze|spiral)$")
    seed: int = Field(default=settings.DBC_SEED, ge=0, lt=2 ** 64)

    # Policy network
    hidden_dim: int = Field(default=settings.DEFAULT_POLICY_HIDDEN_DIM, ge=1, le=4096)
    num_layers: int = Field(default=settings.DEFAULT_POLICY_NUM_LAYERS, ge=1, le=16)
    activation: str = Field(default="tanh", pattern="^(relu|tanh|leaky_relu)$")
    lr: float = Field(default=settings.DEFAULT_POLICY_LR, gt=0.0, le=1.0)
    batch_size: int = Field(default=settings.DEFAULT_BATCH_SIZE, ge=1)
    epochs: int = Field(default=settings.DEFAULT_POLICY_EPOCHS, ge=0)
    lr_decay: str = Field(default="linear", pattern="^(none|linear|step)$")
    decay_factor: float = Field(default=0.5, gt=0.0, le=1.0)
    decay_every: int = Field(default=1000, ge=1)

    # Diffusion model
    dm_hidden_dim: int = Field(default=settings.DEFAULT_DM_HIDDEN_DIM, ge=1, le=4096)
    dm_num_layers: int = Field(default=settings.DEFAULT_DM_NUM_LAYERS, ge=1, le=16)
    dm_activation: str = Field(default="relu", pattern="^(relu|tanh|leaky_relu)$")
    dm_lr: float = Field(default=settings.DEFAULT_DM_LR, gt=0.0, le=1.0)
    dm_batch_size: int = Field(default=settings.DEFAULT_BATCH_SIZE, ge=1)
    dm_epochs: int = Field(default=settings.DEFAULT_DM_EPOCHS, ge=0)
    dm_lr_decay: str = Field(default="none", pattern="^(none|linear|step)$")
    dm_decay_factor: float = Field(default=0.5, gt=0.0, le=1.0)
    dm_decay_every: int = Field(default=1000, ge=1)
    n_steps: int = Field(default=settings.DEFAULT_DIFFUSION_STEPS, ge=1, le=10000)
    beta_start: float = Field(default=settings.DEFAULT_BETA_START, gt=0.0, lt=1.0)
    beta_end: float = Field(default=settings.DEFAULT_BETA_END, gt=0.0, lt=1.0)
    beta_reference_steps: int = Field(default=settings.DEFAULT_BETA_REFERENCE_STEPS, ge=0)
    noise_level: float = Field(default=0.0, ge=0.0)

    # DBC objective
    lam: float = Field(default=settings.DEFAULT_LAMBDA, description="Weight of L_DM; must be >= 0")
    use_expert_normalization: bool = True
    share_noise: bool = True
    use_bc_loss: bool = True

    # Baselines
    ebm_hidden_dim: int = Field(default=128, ge=1)
    ebm_num_layers: int = Field(default=5, ge=1)
    ebm_lr: float = Field(default=5e-4, gt=0.0)
    ebm_epochs: int = Field(default=8000, ge=0)
    ebm_decay_factor: float = Field(default=0.99, gt=0.0, le=1.0)
    ebm_decay_every: int = Field(default=100, ge=1)
    n_neg: int = Field(default=settings.DEFAULT_N_NEG, ge=1)
    lambda_ebm: float = Field(default=settings.DEFAULT_LAMBDA_EBM, ge=0.0)
    ibc_samples: int = Field(default=settings.DEFAULT_IBC_SAMPLES, ge=1)
    ibc_iters: int = Field(default=settings.DEFAULT_IBC_ITERS, ge=1)
    latent_dim: int = Field(default=128, ge=1)
    vae_hidden_dim: int = Field(default=128, ge=1)
    vae_num_layers: int = Field(default=5, ge=1)
    vae_lr: float = Field(default=1e-4, gt=0.0)
    vae_epochs: int = Field(default=8000, ge=0)
    vae_decay_factor: float = Field(default=0.5, gt=0.0, le=1.0)
    vae_decay_every: int = Field(default=5000, ge=1)
    kl_weight: float = Field(default=1.0, ge=0.0)
    lambda_vae: float = Field(default=settings.DEFAULT_LAMBDA_VAE, ge=0.0)
    gan_hidden_dim: int = Field(default=256, ge=1)
    gan_num_layers: int = Field(default=3, ge=1)
    gan_lr: float = Field(default=5e-5, gt=0.0)
    lambda_gan: float = Field(default=settings.DEFAULT_LAMBDA_GAN, ge=0.0)
    dp_hidden_dim: int = Field(default=256, ge=1)
    dp_num_layers: int = Field(default=5, ge=1)
    dp_lr: float = Field(default=2e-4, gt=0.0)
    dp_epochs: int = Field(default=20000, ge=0)
    guide_hidden_dim: int = Field(default=256, ge=1)
    guide_num_layers: int = Field(default=3, ge=1)
    action_low: float = -1.0
    action_high: float = 1.0

    # Environments and evaluation
    demo_episodes: int = Field(default=settings.DEFAULT_DEMO_EPISODES, ge=1)
    eval_episodes: int = Field(default=settings.DEFAULT_EVAL_EPISODES, ge=1)
    goal_band: str = Field(default="eval", pattern="^(train|eval)$")

    # Experiments
    sweep_lambdas: List[float] = Field(default_factory=lambda: [0.0, 30.0, 300.0])
    sweep_seeds: List[int] = Field(default_factory=lambda: [0, 1, 2])
    fractions: List[float] = Field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])
    noise_levels: List[float] = Field(default_factory=lambda: [0.0, 0.01, 0.02, 0.05])
    compare_methods: List[str] = Field(default_factory=lambda: ["bc", "ibc", "dp", "ebm", "vae", "gan", "dbc"])
    field_dims: List[int] = Field(default_factory=lambda: [-2, -1])
    field_resolution: int = Field(default=20, ge=1)
    field_extent: float = Field(default=3.0, gt=0.0)
    field_level: int = Field(default=1, ge=1)

    log_every: int = Field(default=100, ge=1)

    @field_validator(*_LIST_FIELDS, mode="before")
    @classmethod
    def _split_list(cls, value):
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    @field_validator("role")
    @classmethod
    def _check_role(cls, value):
        if value not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")
        return value

    @field_validator("lam")
    @classmethod
    def _check_lambda(cls, value):
        if value < 0:
            raise ValueError("lambda must be non-negative")
        return value

    @field_validator("compare_methods")
    @classmethod
    def _check_methods(cls, value):
        unknown = [m for m in value if m not in ROLES[2:]]
        if unknown:
            raise ValueError(f"unknown methods {unknown}")
        return value

    @model_validator(mode="after")
    def _check_ranges(self):
        if self.beta_start > self.beta_end:
            raise ValueError("beta_start must not exceed beta_end")
        if self.action_low >= self.action_high:
            raise ValueError("action_low must be below action_high")
        return self

    @classmethod
    def for_role(cls, role: str, **overrides: Any) -> "TrainConfig":
        """Defaults for one role, validated like a parsed file."""
        return build_config({"role": role, **overrides})

    def with_overrides(self, **overrides: Any) -> "TrainConfig":
        """Validated copy with some fields replaced."""
        return build_config({**self.model_dump(), **overrides})

    def render(self) -> str:
        """Canonical `key = value` text; the digest is computed over this."""
        lines = []
        for key, value in sorted(self.model_dump().items()):
            if isinstance(value, list):
                value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    @property
    def digest(self) -> str:
        return digest_text(self.render())


def parse_config_text(text: str) -> Dict[str, str]:
    """Parse flat `key = value` lines; `#` starts a comment."""
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Line {lineno}: expected `key = value`, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"Line {lineno}: empty key")
        if key == "lambda":
            key = "lam"
        values[key] = value
    return values


def build_config(values: Dict[str, Any]) -> TrainConfig:
    unknown = sorted(set(values) - set(TrainConfig.model_fields))
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")
    try:
        return TrainConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e


def load_config(path: Optional[PathLike] = None, **overrides: Any) -> TrainConfig:
    """Read a config file (optional) and apply CLI overrides on top."""
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        values.update(parse_config_text(path.read_text(encoding="utf-8")))
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = build_config(values)
    logger.info(f"✅ Config loaded (digest {cfg.digest})")
    return cfg
