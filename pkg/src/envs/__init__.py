from src.envs.dynamics import observe, reset, spiral_expert_end, state_from_observation, step
from src.envs.experts import expert_actor, scripted_maze_expert, scripted_spiral_expert, zero_actor
from src.envs.models import EnvState, PointMassWorld, SpiralWorld
from src.envs.rollout import collect_demos, evaluate, run_episode, verify_replay

__all__ = [
    "PointMassWorld", "SpiralWorld", "EnvState",
    "reset", "step", "observe", "state_from_observation", "spiral_expert_end",
    "scripted_maze_expert", "scripted_spiral_expert", "expert_actor", "zero_actor",
    "collect_demos", "evaluate", "run_episode", "verify_replay",
]
