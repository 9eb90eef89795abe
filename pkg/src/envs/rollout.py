"""
Demo collection and policy evaluation.

An actor is any callable `actor(observation, env_state, rng) -> action`; learned
policies read only the observation, the scripted experts read the state.
"""
import asyncio
import logging
import time
from typing import Callable, List, Optional, Tuple

import numpy as np

from src.config import settings
from src.envs.dynamics import World, distance_to_goal, observe, reset, state_from_observation, step
from src.envs.models import SpiralWorld
from src.errors import ConfigError, DataQualityError
from src.harness.dataset import DemoDataset
from src.harness.reports import EpisodeRecord, EvalReport
from src.numcore import Rng

logger = logging.getLogger(__name__)

Actor = Callable[[np.ndarray, object, Rng], np.ndarray]

MIN_EXPERT_SUCCESS = 0.5


def run_episode(world: World, actor: Actor, rng: Rng, goal_band: str = "train",
                episode: int = 0) -> Tuple[EpisodeRecord, List[np.ndarray], List[np.ndarray]]:
    """Roll out one episode; returns its record plus the observations and actions taken."""
    state = reset(world, rng.spawn("reset"), goal_band)
    actor_rng = rng.spawn("actor")
    observations, actions = [], []
    done = success = False
    while not done:
        obs = observe(world, state)
        action = np.asarray(actor(obs, state, actor_rng), dtype=np.float64).ravel()
        observations.append(obs)
        actions.append(action)
        state, done, success = step(world, state, action)
    record = EpisodeRecord(episode=episode, success=success, length=state.step_index,
                           final_distance=distance_to_goal(state))
    return record, observations, actions


def verify_replay(world: World, dataset: DemoDataset):
    """Every stored pair stepped through the dynamics must reproduce the next stored state."""
    for k in range(len(dataset) - 1):
        if dataset.traj_ids[k] != dataset.traj_ids[k + 1]:
            continue
        state = state_from_observation(world, dataset.states[k], int(dataset.steps[k]))
        nxt, _, _ = step(world, state, dataset.actions[k])
        if not np.array_equal(observe(world, nxt), dataset.states[k + 1]):
            raise DataQualityError(
                f"Replay mismatch in trajectory {dataset.traj_ids[k]} at step {dataset.steps[k]}"
            )


def collect_demos(world: World, expert: Actor, episodes: int, rng: Rng, goal_band: str = "train") -> DemoDataset:
    """
    Roll out the expert `episodes` times. Maze demos keep only successful episodes
    and fail when fewer than half succeed; spiral demos keep everything.
    """
    keep_all = isinstance(world, SpiralWorld)
    traj_ids, steps, states, actions = [], [], [], []
    successes = 0
    for i in range(episodes):
        record, obs, acts = run_episode(world, expert, rng.spawn(i), goal_band, episode=i)
        successes += record.success
        if not (keep_all or record.success):
            continue
        traj_ids.extend([i] * len(obs))
        steps.extend(range(len(obs)))
        states.extend(obs)
        actions.extend(acts)

    rate = successes / episodes if episodes else 0.0
    if not keep_all and rate < MIN_EXPERT_SUCCESS:
        raise DataQualityError(f"Expert succeeded on only {rate:.1%} of {episodes} episodes")
    if not states:
        raise DataQualityError("No demonstrations were kept")
    dataset = DemoDataset(traj_ids, steps, np.vstack(states), np.vstack(actions))
    verify_replay(world, dataset)
    logger.info(f"✅ Collected {len(dataset)} pairs from {len(dataset.trajectory_lengths())} "
                f"trajectories (expert success {rate:.1%})")
    return dataset


def episode_rng(base_seed: int, episode: int) -> Rng:
    return Rng(base_seed).spawn("eval").spawn(episode)


async def evaluate_async(actor: Actor, world: World, episodes: int, base_seed: int,
                         goal_band: str = "eval", method: str = "policy", config_digest: str = "",
                         max_concurrent: Optional[int] = None) -> EvalReport:
    if episodes < 1:
        raise ConfigError(f"Evaluation needs at least one episode, got {episodes}")
    semaphore = asyncio.Semaphore(max_concurrent or settings.DBC_MAX_CONCURRENT_EPISODES)

    async def run_one(i: int) -> EpisodeRecord:
        async with semaphore:
            record, _, _ = await asyncio.to_thread(
                run_episode, world, actor, episode_rng(base_seed, i), goal_band, i
            )
            return record

    records = await asyncio.gather(*(run_one(i) for i in range(episodes)))
    return EvalReport.from_records(method, goal_band, list(records), base_seed, config_digest)


def evaluate(actor: Actor, world: World, episodes: int, base_seed: int, goal_band: str = "eval",
             method: str = "policy", config_digest: str = "", max_concurrent: Optional[int] = None) -> EvalReport:
    """Run `episodes` independently seeded episodes, concurrently, and summarize them."""
    start = time.perf_counter()
    report = asyncio.run(evaluate_async(actor, world, episodes, base_seed, goal_band, method,
                                        config_digest, max_concurrent))
    logger.info(f"🔍 {method} on {goal_band} band: success {report.success_rate:.4f}, "
                f"mean length {report.mean_episode_length:.1f} ({time.perf_counter() - start:.1f}s)")
    return report
