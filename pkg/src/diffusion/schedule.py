from typing import Union

import numpy as np

from src.errors import ConfigError, RangeError

NoiseLevel = Union[int, np.ndarray]


class DiffusionSchedule:
    """
    Per-step noise constants for n = 1..N, stored 0-based (index n - 1).
    """

    def __init__(self, beta: np.ndarray):
        self.beta = np.asarray(beta, dtype=np.float64)
        self.N = int(self.beta.size)
        self.alpha = 1.0 - self.beta
        self.alpha_bar = np.cumprod(self.alpha)
        self.sigma = np.sqrt(self.beta)

    def check_level(self, n: NoiseLevel) -> np.ndarray:
        levels = np.asarray(n, dtype=np.int64)
        if levels.size and (levels.min() < 1 or levels.max() > self.N):
            raise RangeError(f"Noise level must lie in 1..{self.N}, got {n}")
        return levels

    def at(self, table: np.ndarray, n: NoiseLevel) -> np.ndarray:
        return table[self.check_level(n) - 1]


def make_schedule(N: int, beta_start: float, beta_end: float) -> DiffusionSchedule:
    """Linear beta schedule from beta_start to beta_end over N steps."""
    if N < 1:
        raise ConfigError(f"Diffusion step count must be >= 1, got {N}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigError(f"Need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    return DiffusionSchedule(np.linspace(beta_start, beta_end, N))


def scaled_schedule(N: int, beta_start: float, beta_end: float, reference_steps: int) -> DiffusionSchedule:
    """
    Linear schedule whose endpoints are quoted for a `reference_steps` chain.

    Betas are multiplied by reference_steps / N so a short chain still ends near
    pure noise. reference_steps = 0 disables the rescaling.
    """
    if reference_steps and N != reference_steps:
        scale = reference_steps / N
        beta_start, beta_end = beta_start * scale, beta_end * scale
    return make_schedule(N, beta_start, beta_end)
