import numpy as np

from src.envs.models import EnvState, PointMassWorld, SpiralWorld
from src.errors import RangeError

DEFAULT_MAZE = PointMassWorld()
DEFAULT_SPIRAL = SpiralWorld()


def scripted_maze_expert(state: EnvState, world: PointMassWorld = DEFAULT_MAZE) -> np.ndarray:
    """PD controller toward the goal, clamped to the acceleration box."""
    p = np.asarray(state.position)
    v = np.asarray(state.velocity)
    a = world.kp * (np.asarray(state.goal) - p) - world.kd * v
    return np.clip(a, -world.max_accel, world.max_accel)


def scripted_spiral_expert(step_index: int, world: SpiralWorld = DEFAULT_SPIRAL) -> np.ndarray:
    """The fixed four-segment acceleration schedule."""
    if step_index < 0 or step_index >= world.max_steps:
        raise RangeError(f"Spiral expert is defined for steps 0..{world.max_steps - 1}, got {step_index}")
    return np.asarray(world.action_schedule[step_index // world.segment_length], dtype=np.float64)


def maze_expert_actor(world: PointMassWorld = DEFAULT_MAZE):
    return lambda obs, state, rng: scripted_maze_expert(state, world)


def spiral_expert_actor(world: SpiralWorld = DEFAULT_SPIRAL):
    return lambda obs, state, rng: scripted_spiral_expert(state.step_index, world)


def expert_actor(world):
    if isinstance(world, SpiralWorld):
        return spiral_expert_actor(world)
    return maze_expert_actor(world)


def zero_actor(obs, state, rng) -> np.ndarray:
    return np.zeros(2)
