from typing import Optional, Protocol

import numpy as np

from src.dbc.models import Policy
from src.diffusion.model import EMBED_DIM, timestep_embedding
from src.diffusion.schedule import DiffusionSchedule, NoiseLevel
from src.errors import ShapeError, UsageError
from src.harness.dataset import NormStats
from src.numcore import Matrix, MlpModel, Rng, as_matrix
from src.numcore.losses import sigmoid


class EnergyFunction(Protocol):
    """Anything that scores (state, action) rows with a scalar energy."""
    action_dim: int

    def energy(self, states: Matrix, actions: Matrix) -> np.ndarray: ...

    def energy_and_grad(self, states: Matrix, actions: Matrix): ...


def _mlp_dims(in_dim: int, hidden_dim: int, num_layers: int, out_dim: int):
    return [in_dim] + [hidden_dim] * (num_layers - 1) + [out_dim]


class EnergyModel:
    """E_φ(s, a): lower is more expert-like."""

    def __init__(self, net: MlpModel, state_dim: int, action_dim: int, norm: Optional[NormStats] = None):
        if net.out_dim != 1 or net.in_dim != state_dim + action_dim:
            raise ShapeError(f"Energy network must map {state_dim + action_dim} -> 1")
        self.net = net
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.norm = norm

    @classmethod
    def build(cls, state_dim, action_dim, hidden_dim, num_layers, rng: Rng, norm=None) -> "EnergyModel":
        dims = _mlp_dims(state_dim + action_dim, hidden_dim, num_layers, 1)
        return cls(MlpModel.initialize(dims, "relu", rng), state_dim, action_dim, norm)

    def energy(self, states: Matrix, actions: Matrix) -> np.ndarray:
        return self.net.predict(np.hstack([as_matrix(states), as_matrix(actions)]))[:, 0]

    def energy_and_grad(self, states: Matrix, actions: Matrix):
        """Energies and d E / d a per row; parameters are left untouched."""
        if self.net.trainable:
            raise UsageError("Freeze the energy model before using it as guidance")
        energies = self.net.forward(np.hstack([as_matrix(states), as_matrix(actions)]))
        d_inputs = self.net.backward(np.ones_like(energies))
        return energies[:, 0], d_inputs[:, self.state_dim:]

    def freeze(self) -> "EnergyModel":
        self.net.freeze()
        return self


class VaeModel:
    """Encoder (s⧺a) -> (μ, log σ²) and decoder latent -> (s⧺a)."""

    def __init__(self, encoder: MlpModel, decoder: MlpModel, latent_dim: int,
                 state_dim: int, action_dim: int, norm: Optional[NormStats] = None):
        dim = state_dim + action_dim
        if encoder.in_dim != dim or encoder.out_dim != 2 * latent_dim:
            raise ShapeError("Encoder must map the joint vector to 2 x latent_dim")
        if decoder.in_dim != latent_dim or decoder.out_dim != dim:
            raise ShapeError("Decoder must map latent_dim back to the joint vector")
        self.encoder = encoder
        self.decoder = decoder
        self.latent_dim = latent_dim
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.norm = norm

    @classmethod
    def build(cls, state_dim, action_dim, latent_dim, hidden_dim, num_layers, rng: Rng, norm=None) -> "VaeModel":
        dim = state_dim + action_dim
        encoder = MlpModel.initialize(_mlp_dims(dim, hidden_dim, num_layers, 2 * latent_dim),
                                      "leaky_relu", rng.spawn("encoder"))
        decoder = MlpModel.initialize(_mlp_dims(latent_dim, hidden_dim, num_layers, dim),
                                      "leaky_relu", rng.spawn("decoder"))
        return cls(encoder, decoder, latent_dim, state_dim, action_dim, norm)

    def freeze(self) -> "VaeModel":
        self.encoder.freeze()
        self.decoder.freeze()
        return self


class GanPair:
    """Generator policy and a logit-output discriminator over (s⧺a)."""

    def __init__(self, generator: Policy, discriminator: MlpModel):
        if discriminator.out_dim != 1 or discriminator.in_dim != generator.state_dim + generator.action_dim:
            raise ShapeError("Discriminator must map the joint vector to one logit")
        self.generator = generator
        self.discriminator = discriminator

    def logits(self, states: Matrix, actions: Matrix) -> np.ndarray:
        return self.discriminator.predict(np.hstack([as_matrix(states), as_matrix(actions)]))[:, 0]

    def probability(self, states: Matrix, actions: Matrix) -> np.ndarray:
        """D(s, a) in (0, 1)."""
        return sigmoid(self.logits(states, actions))


class CondDiffusionPolicy:
    """ε̂(s, a_n, n) over action dims; acts by reverse diffusion conditioned on s."""

    def __init__(self, net: MlpModel, sched: DiffusionSchedule, state_dim: int, action_dim: int,
                 norm: Optional[NormStats] = None):
        if net.in_dim != state_dim + action_dim + EMBED_DIM or net.out_dim != action_dim:
            raise ShapeError("Diffusion policy network dims do not match state/action dims")
        self.net = net
        self.sched = sched
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.norm = norm

    @classmethod
    def build(cls, state_dim, action_dim, sched, hidden_dim, num_layers, rng: Rng, norm=None) -> "CondDiffusionPolicy":
        dims = _mlp_dims(state_dim + action_dim + EMBED_DIM, hidden_dim, num_layers, action_dim)
        return cls(MlpModel.initialize(dims, "relu", rng), sched, state_dim, action_dim, norm)

    def inputs(self, states: Matrix, noisy_actions: Matrix, n: NoiseLevel) -> Matrix:
        states = as_matrix(states, cols=self.state_dim, name="states")
        noisy_actions = as_matrix(noisy_actions, cols=self.action_dim, name="noisy actions")
        emb = timestep_embedding(n, self.sched.N, states.shape[0])
        return np.hstack([states, noisy_actions, emb])
