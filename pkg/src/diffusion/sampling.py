import csv
import io
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from src.diffusion.model import NoiseModel, forward_noise
from src.diffusion.schedule import DiffusionSchedule, NoiseLevel
from src.errors import ShapeError
from src.harness.dataset import DemoDataset
from src.numcore import Matrix, Rng, as_matrix
from src.utils import PathLike, atomic_write_text, format_sig

logger = logging.getLogger(__name__)

FIELD_DIGITS = 6


def reverse_step(phi: NoiseModel, x_n: Matrix, n: int, sched: DiffusionSchedule,
                 z: Optional[Matrix]) -> Matrix:
    """One ancestral step x_n -> x_{n-1}; `z=None` drops the noise term."""
    alpha = sched.alpha[n - 1]
    alpha_bar = sched.alpha_bar[n - 1]
    eps_hat = phi.predict_noise(x_n, n)
    mean = (x_n - (1.0 - alpha) / np.sqrt(1.0 - alpha_bar) * eps_hat) / np.sqrt(alpha)
    if z is None or n == 1:
        return mean
    return mean + sched.sigma[n - 1] * z


def reverse_from(phi: NoiseModel, x_n: Matrix, n_start: int, sched: DiffusionSchedule,
                 rng: Optional[Rng] = None, deterministic: bool = False) -> Matrix:
    """Run the reverse chain from level n_start down to x_0."""
    x = as_matrix(x_n, cols=phi.dim, name="x_n").copy()
    for n in range(n_start, 0, -1):
        z = None if deterministic or rng is None else rng.gaussian(x.shape[0], phi.dim)
        x = reverse_step(phi, x, n, sched, z)
    return x


def sample(phi: NoiseModel, sched: DiffusionSchedule, count: int, rng: Rng,
           deterministic: bool = False) -> Matrix:
    """Ancestral sampling of `count` joint (s, a) vectors in normalized space."""
    x_N = rng.gaussian(count, phi.dim)
    out = reverse_from(phi, x_N, sched.N, sched, rng, deterministic)
    logger.info(f"📦 Sampled {count} state-action pairs from the diffusion model")
    return out


def reconstruction_mse(phi: NoiseModel, dataset: DemoDataset, sched: DiffusionSchedule, rng: Rng) -> float:
    """
    Noise every expert pair to level N // 2, denoise deterministically back to
    level 0 and report the mean squared error on the action slice.
    """
    x0 = dataset.joint()
    level = max(1, sched.N // 2)
    eps = rng.gaussian(*x0.shape)
    x_n = forward_noise(x0, level, eps, sched)
    recon = reverse_from(phi, x_n, level, sched, deterministic=True)
    s_dim = dataset.state_dim
    diff = recon[:, s_dim:] - x0[:, s_dim:]
    return float(np.mean(diff * diff))


class GridSpec(BaseModel):
    """Regular grid over two coordinates of the joint vector."""
    dims: Sequence[int] = Field(description="Indices of the two plotted coordinates")
    lo: float = -3.0
    hi: float = 3.0
    resolution: int = Field(default=20, ge=1)


def gradient_field(phi: NoiseModel, grid_spec: GridSpec, n: NoiseLevel, fixed_dims: Matrix) -> np.ndarray:
    """
    Denoising direction −ε̂ on a grid, one row (x, y, dx, dy) per grid point.

    `fixed_dims` is a full joint vector supplying the coordinates held constant.
    """
    dims = list(grid_spec.dims)
    if len(dims) != 2:
        raise ShapeError(f"Gradient field needs exactly 2 grid dims, got {len(dims)}")
    base = np.asarray(fixed_dims, dtype=np.float64).ravel()
    if base.size != phi.dim:
        raise ShapeError(f"fixed_dims has {base.size} entries, expected {phi.dim}")
    i, j = (d % phi.dim for d in dims)

    ticks = np.linspace(grid_spec.lo, grid_spec.hi, grid_spec.resolution)
    gx, gy = np.meshgrid(ticks, ticks, indexing="ij")
    points = np.tile(base, (gx.size, 1))
    points[:, i] = gx.ravel()
    points[:, j] = gy.ravel()
    direction = -phi.predict_noise(points, n)
    return np.column_stack([points[:, i], points[:, j], direction[:, i], direction[:, j]])


def write_field_csv(rows: np.ndarray, path: PathLike) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "y", "dx", "dy"])
    for row in rows:
        writer.writerow([format_sig(v, FIELD_DIGITS) for v in row])
    return atomic_write_text(path, buf.getvalue())
