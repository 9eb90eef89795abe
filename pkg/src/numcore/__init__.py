from src.numcore.matrix import Matrix, as_matrix, check_finite
from src.numcore.mlp import MlpModel, frozen, mlp_backward, mlp_forward
from src.numcore.optim import AdamState, adam_step, scheduled_lr
from src.numcore.rng import Rng, rng_gaussian, rng_uniform

__all__ = [
    "Matrix", "as_matrix", "check_finite",
    "MlpModel", "frozen", "mlp_forward", "mlp_backward",
    "AdamState", "adam_step", "scheduled_lr",
    "Rng", "rng_gaussian", "rng_uniform",
]
