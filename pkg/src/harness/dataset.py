"""
Expert demonstrations as flat (traj_id, t, state, action) records, plus
per-dimension z-score statistics and the dataset CSV format.
"""
import csv
import io
import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.errors import ConfigError, DependencyError, FormatError, ShapeError
from src.numcore import Matrix, as_matrix
from src.utils import PathLike, atomic_write_text, format_sig

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-8
CSV_DIGITS = 9


class DimStats(BaseModel):
    mean: List[float]
    std: List[float] = Field(description="Per-dimension standard deviation, floored at 1e-8")


class NormStats(BaseModel):
    states: DimStats
    actions: DimStats


def _dim_stats(values: Matrix) -> DimStats:
    mean = values.mean(axis=0)
    std = np.maximum(values.std(axis=0), STD_FLOOR)
    return DimStats(mean=mean.tolist(), std=std.tolist())


def apply_norm(vector, stats: DimStats) -> np.ndarray:
    mean = np.asarray(stats.mean)
    std = np.asarray(stats.std)
    return (np.asarray(vector, dtype=np.float64) - mean) / std


def invert_norm(vector, stats: DimStats) -> np.ndarray:
    mean = np.asarray(stats.mean)
    std = np.asarray(stats.std)
    return np.asarray(vector, dtype=np.float64) * std + mean


class DemoDataset:
    """Expert state-action pairs with trajectory bookkeeping."""

    def __init__(
        self,
        traj_ids,
        steps,
        states: Matrix,
        actions: Matrix,
        norm_stats: Optional[NormStats] = None,
        fraction_tag: Optional[float] = None,
    ):
        self.states = as_matrix(states, name="states")
        self.actions = as_matrix(actions, name="actions")
        self.traj_ids = np.asarray(traj_ids, dtype=np.int64).ravel()
        self.steps = np.asarray(steps, dtype=np.int64).ravel()
        rows = self.states.shape[0]
        if not (self.actions.shape[0] == self.traj_ids.size == self.steps.size == rows):
            raise ShapeError("states, actions, traj_ids and steps must have equal length")
        self.state_dim = self.states.shape[1]
        self.action_dim = self.actions.shape[1]
        self.fraction_tag = fraction_tag
        self.norm_stats = norm_stats if norm_stats is not None else (
            compute_norm_stats(self) if rows else None
        )

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def trajectory_ids(self) -> np.ndarray:
        return np.unique(self.traj_ids)

    def trajectory_lengths(self) -> List[int]:
        return [int(np.sum(self.traj_ids == tid)) for tid in self.trajectory_ids]

    def require_nonempty(self):
        if len(self) == 0:
            raise ConfigError("Dataset is empty")

    def normalized(self) -> Tuple[Matrix, Matrix]:
        self.require_nonempty()
        return (
            apply_norm(self.states, self.norm_stats.states),
            apply_norm(self.actions, self.norm_stats.actions),
        )

    def joint(self) -> Matrix:
        """Normalized states ⧺ actions, the diffusion model's data space."""
        s, a = self.normalized()
        return np.hstack([s, a])

    def subsample_fraction(self, fraction: float, rng) -> "DemoDataset":
        """Keep floor(fraction * trajectories) whole trajectories (at least one)."""
        if not 0.0 < fraction <= 1.0:
            raise ConfigError(f"Fraction must lie in (0, 1], got {fraction}")
        ids = self.trajectory_ids
        keep_count = max(1, int(np.floor(fraction * ids.size)))
        keep = np.sort(ids[rng.permutation(ids.size)[:keep_count]])
        mask = np.isin(self.traj_ids, keep)
        subset = DemoDataset(self.traj_ids[mask], self.steps[mask], self.states[mask],
                             self.actions[mask], fraction_tag=fraction)
        logger.info(f"📦 Subsampled {keep_count}/{ids.size} trajectories ({len(subset)} pairs)")
        return subset

    def concat(self, other: "DemoDataset") -> "DemoDataset":
        """Stack two datasets; the other's trajectory ids are shifted past ours."""
        if (other.state_dim, other.action_dim) != (self.state_dim, self.action_dim):
            raise ShapeError("Cannot concatenate datasets with different dimensions")
        shift = int(self.traj_ids.max()) + 1 - int(other.traj_ids.min()) if len(self) and len(other) else 0
        return DemoDataset(
            np.concatenate([self.traj_ids, other.traj_ids + shift]),
            np.concatenate([self.steps, other.steps]),
            np.vstack([self.states, other.states]),
            np.vstack([self.actions, other.actions]),
        )


def compute_norm_stats(dataset: DemoDataset) -> NormStats:
    if len(dataset) == 0:
        raise ConfigError("Cannot compute normalization statistics of an empty dataset")
    return NormStats(states=_dim_stats(dataset.states), actions=_dim_stats(dataset.actions))


def _header(state_dim: int, action_dim: int) -> List[str]:
    return (["traj_id", "t"] + [f"s{i}" for i in range(state_dim)]
            + [f"a{i}" for i in range(action_dim)])


def save_dataset(dataset: DemoDataset, path: PathLike) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_header(dataset.state_dim, dataset.action_dim))
    for i in range(len(dataset)):
        writer.writerow(
            [int(dataset.traj_ids[i]), int(dataset.steps[i])]
            + [format_sig(v, CSV_DIGITS) for v in dataset.states[i]]
            + [format_sig(v, CSV_DIGITS) for v in dataset.actions[i]]
        )
    out = atomic_write_text(path, buf.getvalue())
    logger.info(f"📦 Saved {len(dataset)} pairs to {out}")
    return out


def load_dataset(path: PathLike) -> DemoDataset:
    path = Path(path)
    if not path.exists():
        raise DependencyError(str(path), stage="gen-demos")
    raw = path.read_bytes()
    lines = raw.split(b"\n")
    try:
        header = lines[0].decode("utf-8").split(",")
    except UnicodeDecodeError:
        raise FormatError(f"Dataset header in {path} is not UTF-8", offset=0)
    state_cols = [h for h in header if h.startswith("s")]
    action_cols = [h for h in header if h.startswith("a")]
    if header != _header(len(state_cols), len(action_cols)):
        raise FormatError(f"Unexpected dataset header in {path}", offset=0)

    width = len(header)
    ids, steps, states, actions = [], [], [], []
    offset = len(lines[0]) + 1
    for line in lines[1:]:
        if not line:
            offset += 1
            continue
        try:
            fields = line.decode("utf-8").split(",")
        except UnicodeDecodeError:
            raise FormatError("Dataset row is not UTF-8", offset=offset)
        if len(fields) != width:
            raise FormatError(f"Row has {len(fields)} fields, expected {width}", offset=offset)
        try:
            ids.append(int(fields[0]))
            steps.append(int(fields[1]))
            values = [float(v) for v in fields[2:]]
        except ValueError:
            raise FormatError("Non-numeric field in dataset row", offset=offset)
        states.append(values[:len(state_cols)])
        actions.append(values[len(state_cols):])
        offset += len(line) + 1

    state_dim, action_dim = len(state_cols), len(action_cols)
    return DemoDataset(
        ids, steps,
        np.asarray(states, dtype=np.float64).reshape(-1, state_dim),
        np.asarray(actions, dtype=np.float64).reshape(-1, action_dim),
    )
