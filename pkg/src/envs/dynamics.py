"""
Pure point-mass dynamics for both worlds. Nothing here draws randomness except
`reset`, which takes its stream explicitly.
"""
from functools import lru_cache
from typing import Tuple, Union

import numpy as np

from src.envs.models import EnvState, PointMassWorld, SpiralWorld, Vec2
from src.errors import ConfigError, ShapeError
from src.numcore import Rng

World = Union[PointMassWorld, SpiralWorld]


def _vec(values) -> Vec2:
    return float(values[0]), float(values[1])


def sample_disk(rng: Rng, center: Vec2, radius: float) -> Vec2:
    """Uniform point in a disk."""
    u = rng.random(2)
    r = radius * np.sqrt(u[0])
    theta = 2.0 * np.pi * u[1]
    return _vec((center[0] + r * np.cos(theta), center[1] + r * np.sin(theta)))


def goal_centers(world: PointMassWorld, goal_band: str):
    if goal_band == "train":
        return world.train_centers
    if goal_band == "eval":
        return world.eval_centers
    raise ConfigError(f"goal_band must be 'train' or 'eval', got '{goal_band}'")


def reset(world: World, rng: Rng, goal_band: str = "train") -> EnvState:
    if isinstance(world, SpiralWorld):
        start = sample_disk(rng, (0.0, 0.0), world.start_jitter)
        return EnvState(position=start, goal=spiral_expert_end(world))
    centers = goal_centers(world, goal_band)
    center = centers[int(rng.integers(0, len(centers)))]
    goal = sample_disk(rng, center, world.goal_disk_radius)
    return EnvState(position=world.start, goal=goal)


def _integrate(world: World, state: EnvState, action) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(action, dtype=np.float64).ravel()
    if a.size != 2:
        raise ShapeError(f"Actions are 2-D accelerations, got {a.size} values")
    a = np.clip(a, -world.max_accel, world.max_accel)
    v = world.damping * (np.asarray(state.velocity) + world.dt * a)
    speed = float(np.hypot(v[0], v[1]))
    if speed > world.max_speed:
        v = v * (world.max_speed / speed)
    p = np.asarray(state.position) + world.dt * v
    if isinstance(world, PointMassWorld):
        p = np.clip(p, world.low, world.high)
    return p, v


def step(world: World, state: EnvState, action) -> Tuple[EnvState, bool, bool]:
    """Advance one step. Returns (next state, done, success)."""
    p, v = _integrate(world, state, action)
    t = state.step_index + 1
    nxt = EnvState(position=_vec(p), velocity=_vec(v), goal=state.goal, step_index=t)
    dist = distance_to_goal(nxt)
    if isinstance(world, SpiralWorld):
        done = t >= world.max_steps
        return nxt, done, done and dist <= world.success_radius
    success = dist <= world.goal_radius
    return nxt, success or t >= world.max_steps, success


def distance_to_goal(state: EnvState) -> float:
    return float(np.hypot(state.position[0] - state.goal[0], state.position[1] - state.goal[1]))


def observe(world: World, state: EnvState) -> np.ndarray:
    """Maze: (pos, vel, goal). Spiral: (pos, vel)."""
    obs = [*state.position, *state.velocity]
    if isinstance(world, PointMassWorld):
        obs.extend(state.goal)
    return np.asarray(obs, dtype=np.float64)


def state_from_observation(world: World, obs, step_index: int) -> EnvState:
    obs = np.asarray(obs, dtype=np.float64).ravel()
    if obs.size != world.obs_dim:
        raise ShapeError(f"Expected a {world.obs_dim}-dim observation, got {obs.size}")
    goal = _vec(obs[4:6]) if isinstance(world, PointMassWorld) else spiral_expert_end(world)
    return EnvState(position=_vec(obs[0:2]), velocity=_vec(obs[2:4]), goal=goal, step_index=step_index)


@lru_cache(maxsize=16)
def spiral_expert_end(world: SpiralWorld) -> Vec2:
    """Where the scripted spiral ends when started exactly at the origin."""
    state = EnvState(position=(0.0, 0.0))
    for t in range(world.max_steps):
        p, v = _integrate(world, state, world.action_schedule[t // world.segment_length])
        state = EnvState(position=_vec(p), velocity=_vec(v), step_index=t + 1)
    return state.position
