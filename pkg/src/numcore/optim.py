import numpy as np

from src.errors import ConfigError, ShapeError
from src.numcore.mlp import MlpModel


class AdamState:
    """First/second moment buffers and hyperparameters for one model."""

    def __init__(self, size: int, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr < 0:
            raise ConfigError(f"Learning rate must be non-negative, got {lr}")
        self.m = np.zeros(size, dtype=np.float64)
        self.v = np.zeros(size, dtype=np.float64)
        self.step_count = 0
        self.lr = float(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    @classmethod
    def for_model(cls, model: MlpModel, lr: float, **kwargs) -> "AdamState":
        return cls(model.params.size, lr, **kwargs)


def adam_step(model: MlpModel, state: AdamState):
    """Bias-corrected Adam update on `model.params`, then zero the gradients."""
    if not (state.m.size == state.v.size == model.params.size == model.grads.size):
        raise ShapeError(
            f"Adam buffers ({state.m.size}, {state.v.size}) do not match "
            f"params ({model.params.size}) / grads ({model.grads.size})"
        )
    g = model.grads
    state.step_count += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * g
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1 ** state.step_count)
    v_hat = state.v / (1.0 - state.beta2 ** state.step_count)
    model.params -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    model.zero_grad()


def linear_decay(base_lr: float, epoch: int, total_epochs: int) -> float:
    """Linear decay to zero over the run; `epoch` counts from 0."""
    if total_epochs <= 0:
        return base_lr
    return base_lr * max(0.0, 1.0 - epoch / total_epochs)


def step_decay(base_lr: float, epoch: int, factor: float, every: int) -> float:
    """Multiply by `factor` once per `every` epochs."""
    if every <= 0:
        return base_lr
    return base_lr * factor ** (epoch // every)


def scheduled_lr(mode: str, base_lr: float, epoch: int, total_epochs: int, factor: float, every: int) -> float:
    if mode == "none":
        return base_lr
    if mode == "linear":
        return linear_decay(base_lr, epoch, total_epochs)
    if mode == "step":
        return step_decay(base_lr, epoch, factor, every)
    raise ConfigError(f"Unknown lr_decay mode '{mode}'")
