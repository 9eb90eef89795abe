"""
The combined imitation objective: BC regression plus a clamped, expert-normalized
diffusion-model loss on the policy's own state-action pairs.
"""
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel

from src.dbc.models import Policy
from src.diffusion.model import DiffLossTerm, NoiseModel, diff_loss
from src.diffusion.schedule import DiffusionSchedule, NoiseLevel
from src.errors import ShapeError, UsageError
from src.numcore import Matrix, as_matrix
from src.numcore.losses import mse_loss


def bc_loss(policy: Policy, batch_states: Matrix, batch_actions: Matrix) -> Tuple[float, Matrix]:
    """MSE between π(s) and a; returns (loss, d loss / d π(s)) with π's activations cached."""
    pred = policy.net.forward(as_matrix(batch_states, cols=policy.state_dim, name="states"))
    return mse_loss(pred, as_matrix(batch_actions, cols=policy.action_dim, name="actions"))


def _joint(states: Matrix, actions: Matrix) -> Matrix:
    states = as_matrix(states, name="states")
    actions = as_matrix(actions, name="actions")
    if states.shape[0] != actions.shape[0]:
        raise ShapeError(f"{states.shape[0]} states vs {actions.shape[0]} actions")
    return np.hstack([states, actions])


def agent_diff_loss(policy: Policy, phi: NoiseModel, batch_states: Matrix, n: NoiseLevel,
                    eps: Matrix, sched: DiffusionSchedule,
                    predicted_actions: Optional[Matrix] = None) -> DiffLossTerm:
    """
    Diffusion loss of (s, π(s)). Gradients reach π through `backward`, never φ.

    Pass `predicted_actions` when π(s) was already computed with `policy.net.forward`.
    """
    if phi.net.trainable:
        raise UsageError("The diffusion model must be frozen before guiding a policy")
    if predicted_actions is None:
        predicted_actions = policy.net.forward(as_matrix(batch_states, cols=policy.state_dim, name="states"))
    return diff_loss(phi, _joint(batch_states, predicted_actions), n, eps, sched, track=True)


def expert_diff_loss(phi: NoiseModel, batch_states: Matrix, batch_actions: Matrix, n: NoiseLevel,
                     eps: Matrix, sched: DiffusionSchedule) -> DiffLossTerm:
    """Diffusion loss of expert (s, a), detached from every parameter."""
    return diff_loss(phi, _joint(batch_states, batch_actions), n, eps, sched, track=False)


def dm_loss(agent, expert) -> Tuple[float, np.ndarray]:
    """
    Mean over samples of max(agent_i − expert_i, 0).

    Returns the loss and d loss / d agent_i (1/B where unclamped, 0 otherwise).
    """
    agent = np.asarray(agent, dtype=np.float64).ravel()
    expert = np.asarray(expert, dtype=np.float64).ravel()
    if agent.shape != expert.shape:
        raise ShapeError(f"{agent.size} agent losses vs {expert.size} expert losses")
    gap = agent - expert
    active = gap > 0
    return float(np.mean(np.where(active, gap, 0.0))), active / agent.size


def total_loss(bc: float, dm: float, lam: float) -> float:
    return bc + lam * dm


class ObjectiveValue(BaseModel):
    total: float
    bc: float
    dm: float


def dbc_objective(policy: Policy, phi: NoiseModel, states: Matrix, actions: Matrix,
                  n: NoiseLevel, eps: Matrix, sched: DiffusionSchedule, lam: float,
                  use_expert_normalization: bool = True, use_bc_loss: bool = True,
                  expert_n: Optional[NoiseLevel] = None,
                  expert_eps: Optional[Matrix] = None) -> Tuple[ObjectiveValue, Matrix]:
    """
    Evaluate L_BC + λ·L_DM on one batch and return d total / d π(s).

    The caller pushes the returned gradient through `policy.net.backward`.
    `expert_n` / `expert_eps` default to the agent's (n, ε); pass separate draws
    to evaluate the two diffusion terms under independent noise. With expert
    normalization off, L_DM is the plain agent diffusion loss.
    """
    pred = policy.net.forward(as_matrix(states, cols=policy.state_dim, name="states"))
    bc_value, d_pred = mse_loss(pred, actions)
    if not use_bc_loss:
        bc_value, d_pred = 0.0, np.zeros_like(pred)

    dm_value = 0.0
    if lam != 0.0:
        agent = agent_diff_loss(policy, phi, states, n, eps, sched, predicted_actions=pred)
        if use_expert_normalization:
            expert = expert_diff_loss(
                phi, states, actions,
                n if expert_n is None else expert_n,
                eps if expert_eps is None else expert_eps,
                sched,
            )
            dm_value, weights = dm_loss(agent.per_sample, expert.per_sample)
        else:
            dm_value = agent.value
            weights = np.full(pred.shape[0], 1.0 / pred.shape[0])
        d_joint = agent.backward(weights)
        d_pred = d_pred + lam * d_joint[:, policy.state_dim:]

    value = ObjectiveValue(total=total_loss(bc_value, dm_value, lam), bc=bc_value, dm=dm_value)
    return value, d_pred
