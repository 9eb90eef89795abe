import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
for entry in (ROOT, ROOT / "tests"):
    if str(entry) not in sys.path:
        sys.path.insert(0, str(entry))

from src.harness.config import TrainConfig  # noqa: E402
from src.harness.dataset import DemoDataset  # noqa: E402
from src.numcore import Rng  # noqa: E402


@pytest.fixture
def rng():
    return Rng(1234)


@pytest.fixture
def tiny_dataset():
    """4 trajectories x 10 steps, 3-dim states, 2-dim actions."""
    gen = Rng(7)
    states = gen.gaussian(40, 3) * np.array([1.0, 2.0, 0.5]) + np.array([0.5, -1.0, 2.0])
    actions = np.tanh(states[:, :2] * 0.7) + 0.1 * gen.gaussian(40, 2)
    traj_ids = np.repeat(np.arange(4), 10)
    steps = np.tile(np.arange(10), 4)
    return DemoDataset(traj_ids, steps, states, actions)


@pytest.fixture
def tiny_cfg():
    """Small networks and a handful of epochs, for plumbing tests."""
    return TrainConfig(
        hidden_dim=8, num_layers=2, epochs=3, batch_size=16, lr=1e-3,
        dm_hidden_dim=16, dm_num_layers=2, dm_epochs=3, dm_batch_size=16,
        n_steps=10, beta_start=1e-3, beta_end=0.2, beta_reference_steps=0,
        ebm_hidden_dim=8, ebm_num_layers=2, ebm_epochs=2, n_neg=4,
        latent_dim=3, vae_hidden_dim=8, vae_num_layers=2, vae_epochs=2,
        gan_hidden_dim=8, gan_num_layers=2, dp_hidden_dim=8, dp_num_layers=2, dp_epochs=2,
        guide_hidden_dim=8, guide_num_layers=2, ibc_samples=32, ibc_iters=2,
        demo_episodes=3, eval_episodes=2, log_every=1,
        sweep_lambdas=[0.0, 30.0], sweep_seeds=[0], fractions=[0.5, 1.0], noise_levels=[0.0, 0.05],
        compare_methods=["bc", "dbc"], field_resolution=3,
    )
