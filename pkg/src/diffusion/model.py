import logging
from typing import Any, Dict, Optional

import numpy as np

from src.diffusion.schedule import DiffusionSchedule, NoiseLevel
from src.errors import ShapeError, StateError
from src.numcore import Matrix, MlpModel, as_matrix

logger = logging.getLogger(__name__)

EMBED_DIM = 4
_EMBED_FREQS = (0.5, 2.0)


def timestep_embedding(n: NoiseLevel, N: int, rows: int) -> Matrix:
    """Sinusoidal features of n / N, one row per sample."""
    t = np.broadcast_to(np.asarray(n, dtype=np.float64), (rows,)) / N
    cols = []
    for f in _EMBED_FREQS:
        cols.append(np.sin(np.pi * f * t))
        cols.append(np.cos(np.pi * f * t))
    return np.stack(cols, axis=1)


class NoiseModel:
    """
    Noise predictor over concatenated (state, action) vectors.

    The network input is x ⧺ timestep embedding and the output is ε̂ with the same
    width as x. `metadata` records how the model was trained (noise injection etc).
    """

    def __init__(
        self,
        net: MlpModel,
        state_dim: int,
        action_dim: int,
        sched: DiffusionSchedule,
        metadata: Optional[Dict[str, Any]] = None,
    ):
        self.net = net
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.sched = sched
        self.metadata: Dict[str, Any] = dict(metadata or {})
        if net.in_dim != self.dim + EMBED_DIM or net.out_dim != self.dim:
            raise ShapeError(
                f"Noise network dims {net.in_dim}->{net.out_dim} do not fit data dim {self.dim}"
            )

    @property
    def dim(self) -> int:
        return self.state_dim + self.action_dim

    @classmethod
    def build(cls, state_dim: int, action_dim: int, sched: DiffusionSchedule,
              hidden_dim: int, num_layers: int, activation: str, rng) -> "NoiseModel":
        dim = state_dim + action_dim
        dims = [dim + EMBED_DIM] + [hidden_dim] * (num_layers - 1) + [dim]
        return cls(MlpModel.initialize(dims, activation, rng), state_dim, action_dim, sched)

    def _inputs(self, x_n: Matrix, n: NoiseLevel) -> Matrix:
        x_n = as_matrix(x_n, cols=self.dim, name="noised sample")
        return np.hstack([x_n, timestep_embedding(n, self.sched.N, x_n.shape[0])])

    def predict_noise(self, x_n: Matrix, n: NoiseLevel, track: bool = False) -> Matrix:
        inputs = self._inputs(x_n, n)
        return self.net.forward(inputs) if track else self.net.predict(inputs)

    def freeze(self) -> "NoiseModel":
        self.net.freeze()
        return self


def forward_noise(x0: Matrix, n: NoiseLevel, eps: Matrix, sched: DiffusionSchedule) -> Matrix:
    """Closed-form q(x_n | x_0): sqrt(ᾱ_n)·x0 + sqrt(1 − ᾱ_n)·ε."""
    x0 = as_matrix(x0, name="x0")
    eps = as_matrix(eps, name="eps")
    if x0.shape != eps.shape:
        raise ShapeError(f"x0 {x0.shape} and eps {eps.shape} differ")
    ab = sched.at(sched.alpha_bar, n)
    ab = np.broadcast_to(ab, (x0.shape[0],))[:, None]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


class DiffLossTerm:
    """
    Noise-prediction loss on one batch.

    `value` is the mean over batch and coordinates of (ε̂ − ε)^2, `per_sample` the
    per-row coordinate means. `backward(weights)` pushes d loss / d per_sample
    through the network (into φ's grads when it is trainable) and returns
    d loss / d x0.
    """

    def __init__(self, per_sample: np.ndarray, resid: Matrix, sqrt_ab: np.ndarray,
                 phi: NoiseModel, tracked: bool):
        self.per_sample = per_sample
        self.value = float(np.mean(per_sample))
        self._resid = resid
        self._sqrt_ab = sqrt_ab
        self._phi = phi
        self._tracked = tracked

    def backward(self, weights: Optional[np.ndarray] = None) -> Matrix:
        if not self._tracked:
            raise StateError("This loss term was computed detached; it has no gradient")
        rows, dim = self._resid.shape
        if weights is None:
            weights = np.full(rows, 1.0 / rows)
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (rows,):
            raise ShapeError(f"Expected {rows} per-sample weights, got {weights.shape}")
        d_eps_hat = 2.0 * self._resid / dim * weights[:, None]
        d_inputs = self._phi.net.backward(d_eps_hat)
        self._tracked = False
        return d_inputs[:, :dim] * self._sqrt_ab[:, None]


def diff_loss(phi: NoiseModel, batch_x0: Matrix, n: NoiseLevel, eps: Matrix,
              sched: DiffusionSchedule, track: bool = True) -> DiffLossTerm:
    """Noise-prediction MSE at level n; `track=False` gives a detached value."""
    batch_x0 = as_matrix(batch_x0, cols=phi.dim, name="batch")
    x_n = forward_noise(batch_x0, n, eps, sched)
    eps_hat = phi.predict_noise(x_n, n, track=track)
    resid = eps_hat - eps
    per_sample = np.mean(resid * resid, axis=1)
    sqrt_ab = np.sqrt(np.broadcast_to(sched.at(sched.alpha_bar, n), (batch_x0.shape[0],)))
    return DiffLossTerm(per_sample, resid, sqrt_ab, phi, tracked=track)
