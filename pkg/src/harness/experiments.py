"""
Pipeline stages and the studies built on them.

All randomness descends from the run seed through named streams (`demos`,
`dm-train`, `policy-train`, `eval`), so any stage can be rerun on its own and
reproduce the same bytes.
"""
import csv
import io
import logging
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from src.config import settings
from src.diffusion import (
    GridSpec, gradient_field, reconstruction_mse, sample, train_diffusion, write_field_csv,
)
from src.envs import PointMassWorld, SpiralWorld, collect_demos, evaluate, expert_actor
from src.errors import ConfigError
from src.guidance.registry import get_method, train_method
from src.harness.artifacts import load_artifact, save_artifact
from src.harness.config import TrainConfig
from src.harness.dataset import DemoDataset, invert_norm, load_dataset, save_dataset
from src.harness.reports import EvalReport, emit_report
from src.numcore import Rng
from src.utils import atomic_write_text, format_sig

logger = logging.getLogger(__name__)

SUBCOMMANDS = (
    "gen-demos", "train-dm", "train-policy", "train-baseline", "eval", "sweep", "field",
    "augment", "fraction", "noise", "compare", "ablate-norm",
)
BASELINES = ("bc", "ibc", "dp", "ebm", "vae", "gan")
GUIDED_METHODS = ("ebm", "vae", "gan", "dbc")

DEMOS_FILE = "demos.csv"
DM_FILE = "dm.ckpt"
POLICY_FILE = "policy.ckpt"


def make_world(cfg: TrainConfig):
    return SpiralWorld() if cfg.env == "spiral" else PointMassWorld()


def model_file(method: str) -> str:
    return POLICY_FILE if method == "dbc" else f"baseline_{method}.ckpt"


def _write_rows(path: Path, header: Sequence[str], rows: List[Sequence]) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    out = atomic_write_text(path, buf.getvalue())
    logger.info(f"📦 Wrote {len(rows)} rows to {out}")
    return out


def _rate(value: float) -> str:
    return f"{value:.4f}"


class ExperimentRunner:
    """Runs one subcommand against an output directory, timing each stage."""

    def __init__(self, cfg: TrainConfig, out_dir: Path):
        self.cfg = cfg
        self.out = Path(out_dir)
        self.world = make_world(cfg)
        self.root = Rng(cfg.seed)
        self.timings: Dict[str, float] = {}
        self.artifacts: List[Path] = []

    # -- helpers -------------------------------------------------------------

    def _timed(self, name: str, fn: Callable, *args, **kwargs):
        start = time.perf_counter()
        result = fn(*args, **kwargs)
        self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start
        return result

    def _record(self, path: Path) -> Path:
        self.artifacts.append(path)
        return path

    def demos(self) -> DemoDataset:
        return load_dataset(self.out / DEMOS_FILE)

    def diffusion_model(self):
        phi, _ = load_artifact(self.out / DM_FILE, "noise_model", stage="train-dm")
        return phi

    def _check_dims(self, obj, dataset: Optional[DemoDataset] = None):
        state_dim = dataset.state_dim if dataset is not None else self.world.obs_dim
        action_dim = dataset.action_dim if dataset is not None else 2
        if (obj.state_dim, obj.action_dim) != (state_dim, action_dim):
            raise ConfigError(
                f"Model expects ({obj.state_dim}, {obj.action_dim}) state/action dims, "
                f"this run has ({state_dim}, {action_dim})"
            )

    def _score(self, method: str, model, cfg: TrainConfig, seed: int, band: Optional[str] = None) -> EvalReport:
        actor = get_method(method).make_actor(model, cfg)
        return self._timed("eval", evaluate, actor, self.world, cfg.eval_episodes, seed,
                           band or cfg.goal_band, method, cfg.digest)

    def _fit(self, method: str, dataset: DemoDataset, cfg: TrainConfig, seed: int, phi=None):
        rng = Rng(seed).spawn("policy-train")
        return self._timed(f"train {method}", train_method, method, dataset, cfg, rng, phi=phi)

    # -- pipeline stages -----------------------------------------------------

    def gen_demos(self):
        dataset = self._timed("demos", collect_demos, self.world, expert_actor(self.world),
                              self.cfg.demo_episodes, self.root.spawn("demos"), "train")
        self._record(save_dataset(dataset, self.out / DEMOS_FILE))

    def train_dm(self):
        dataset = self.demos()
        phi = self._timed("train dm", train_diffusion, dataset, self.cfg, self.root.spawn("dm-train"))
        self._record(save_artifact(self.out / DM_FILE, phi, "dm", self.cfg.digest, dataset.norm_stats))

    def train_policy(self):
        dataset = self.demos()
        phi = self.diffusion_model()
        self._check_dims(phi, dataset)
        policy = self._timed("train dbc", train_method, "dbc", dataset, self.cfg,
                             self.root.spawn("policy-train"), phi=phi)
        self._record(save_artifact(self.out / POLICY_FILE, policy, "dbc", self.cfg.digest))

    def train_baseline(self, method: str):
        if method not in BASELINES:
            raise ConfigError(f"Unknown baseline '{method}'. Choose from {', '.join(BASELINES)}")
        dataset = self.demos()
        model = self._timed(f"train {method}", train_method, method, dataset, self.cfg,
                            self.root.spawn("policy-train"))
        self._record(save_artifact(self.out / model_file(method), model, method, self.cfg.digest))

    def eval(self, method: str, band: Optional[str] = None):
        model, _ = load_artifact(self.out / model_file(method),
                                 stage="train-policy" if method == "dbc" else "train-baseline")
        self._check_dims(model)
        report = self._score(method, model, self.cfg, self.cfg.seed, band)
        self._record(emit_report(report, self.out / f"eval_{method}_{report.goal_band}.csv"))
        return report

    # -- studies -------------------------------------------------------------

    def sweep(self):
        """DBC success over λ values, each λ paired with the same seeds."""
        dataset, phi = self.demos(), self.diffusion_model()
        rows = []
        for seed in self.cfg.sweep_seeds:
            for lam in self.cfg.sweep_lambdas:
                cfg = self.cfg.with_overrides(lam=lam, seed=seed)
                report = self._score("dbc", self._fit("dbc", dataset, cfg, seed, phi), cfg, seed)
                rows.append([repr(float(lam)), seed, _rate(report.success_rate),
                             _rate(report.mean_episode_length)])
        self._record(_write_rows(self.out / "sweep.csv", ["lambda", "seed", "success_rate", "mean_len"], rows))

    def ablate_norm(self):
        """DBC with and without the expert normalization term, paired seeds."""
        dataset, phi = self.demos(), self.diffusion_model()
        rows = []
        for seed in self.cfg.sweep_seeds:
            for flag in (True, False):
                cfg = self.cfg.with_overrides(use_expert_normalization=flag, seed=seed)
                report = self._score("dbc", self._fit("dbc", dataset, cfg, seed, phi), cfg, seed)
                rows.append([str(flag).lower(), seed, _rate(report.success_rate),
                             _rate(report.mean_episode_length)])
        self._record(_write_rows(self.out / "ablate_norm.csv",
                                 ["use_expert_normalization", "seed", "success_rate", "mean_len"], rows))

    def compare(self):
        """
        Every configured method on the same demos and seeds. Guided methods run
        both without and with the BC term; the `bc` column says which.
        """
        dataset = self.demos()
        phi = self.diffusion_model() if "dbc" in self.cfg.compare_methods else None
        rows = []
        for method in self.cfg.compare_methods:
            flags = (False, True) if method in GUIDED_METHODS else (method == "bc",)
            for use_bc in flags:
                for seed in self.cfg.sweep_seeds:
                    cfg = self.cfg.with_overrides(seed=seed, use_bc_loss=use_bc or method == "bc")
                    model = self._fit(method, dataset, cfg, seed, phi if method == "dbc" else None)
                    report = self._score(method, model, cfg, seed)
                    rows.append([method, str(use_bc).lower(), seed, _rate(report.success_rate),
                                 _rate(report.mean_episode_length)])
        self._record(_write_rows(self.out / "compare.csv",
                                 ["method", "bc", "seed", "success_rate", "mean_len"], rows))

    def fraction(self):
        """BC vs DBC trained on whole-trajectory subsets of the demos."""
        dataset = self.demos()
        rows = []
        for frac in self.cfg.fractions:
            for seed in self.cfg.sweep_seeds:
                cfg = self.cfg.with_overrides(seed=seed)
                subset = dataset.subsample_fraction(frac, Rng(seed).spawn("fraction"))
                phi = self._timed("train dm", train_diffusion, subset, cfg, Rng(seed).spawn("dm-train"))
                for method in ("bc", "dbc"):
                    model = self._fit(method, subset, cfg, seed, phi if method == "dbc" else None)
                    report = self._score(method, model, cfg, seed)
                    rows.append([repr(float(frac)), method, seed, len(subset.trajectory_ids),
                                 _rate(report.success_rate)])
        self._record(_write_rows(self.out / "fraction.csv",
                                 ["fraction", "method", "seed", "trajectories", "success_rate"], rows))

    def noise(self):
        """Diffusion models trained with injected action noise: reconstruction error and guided success."""
        dataset = self.demos()
        rows = []
        for level in self.cfg.noise_levels:
            cfg = self.cfg.with_overrides(noise_level=level)
            phi = self._timed("train dm", train_diffusion, dataset, cfg, self.root.spawn("dm-train"))
            mse = reconstruction_mse(phi, dataset, phi.sched, self.root.spawn("reconstruction"))
            report = self._score("dbc", self._fit("dbc", dataset, cfg, cfg.seed, phi), cfg, cfg.seed)
            rows.append([repr(float(level)), format_sig(mse, 6), _rate(report.success_rate)])
        self._record(_write_rows(self.out / "noise.csv", ["noise_level", "reconstruction_mse", "success_rate"], rows))

    def augment(self):
        """BC on real demos vs BC on real + an equal number of diffusion samples."""
        dataset, phi = self.demos(), self.diffusion_model()
        self._check_dims(phi, dataset)
        joint = self._timed("sample", sample, phi, phi.sched, len(dataset), self.root.spawn("augment"))
        synthetic = DemoDataset(
            np.arange(len(dataset)), np.zeros(len(dataset), dtype=np.int64),
            invert_norm(joint[:, :dataset.state_dim], dataset.norm_stats.states),
            invert_norm(joint[:, dataset.state_dim:], dataset.norm_stats.actions),
        )
        augmented = dataset.concat(synthetic)
        self._record(save_dataset(augmented, self.out / "augmented.csv"))
        rows = []
        for seed in self.cfg.sweep_seeds:
            cfg = self.cfg.with_overrides(seed=seed)
            for tag, data in (("bc", dataset), ("bc-augmented", augmented)):
                report = self._score("bc", self._fit("bc", data, cfg, seed), cfg, seed)
                rows.append([tag, seed, len(data), _rate(report.success_rate)])
        self._record(_write_rows(self.out / "augment.csv", ["dataset", "seed", "pairs", "success_rate"], rows))

    def field(self):
        dataset, phi = self.demos(), self.diffusion_model()
        extent = self.cfg.field_extent
        grid = GridSpec(dims=self.cfg.field_dims, lo=-extent, hi=extent, resolution=self.cfg.field_resolution)
        rows = gradient_field(phi, grid, self.cfg.field_level, np.zeros(phi.dim))
        self._record(write_field_csv(rows, self.out / "field.csv"))
        logger.info(f"🔍 Gradient field over dims {list(grid.dims)} of a {dataset.state_dim}+"
                    f"{dataset.action_dim}-dim space at level {self.cfg.field_level}")

    # -- reporting -----------------------------------------------------------

    def print_summary(self, subcommand: str, total: float):
        print("\n" + "#" * 50)
        print(f"{'EXPERIMENT SUMMARY':^50}")
        print("#" * 50)
        print(f"{'  Subcommand':<35} | {subcommand}")
        print(f"{'  Environment':<35} | {self.cfg.env}")
        print(f"{'  Seed':<35} | {self.cfg.seed}")
        print(f"{'  Config digest':<35} | {self.cfg.digest}")
        print("-" * 50)
        print(f"{'STAGE TIMINGS':<35}")
        print("-" * 50)
        for name, seconds in self.timings.items():
            print(f"{'  ' + name:<35} | {seconds:>7.3f}s")
        print("-" * 50)
        print(f"{'ARTIFACTS':<35}")
        print("-" * 50)
        for path in self.artifacts:
            print(f"  {path}")
        print("-" * 50)
        print(f"{'TOTAL':<35} | {total:>7.3f}s")
        print("#" * 50 + "\n")


def run_experiment(cfg: TrainConfig, subcommand: str, out_dir=None, method: Optional[str] = None,
                   band: Optional[str] = None, show_summary: bool = True) -> List[Path]:
    """Run one subcommand; returns the paths it wrote."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"Unknown subcommand '{subcommand}'. Choose from {', '.join(SUBCOMMANDS)}")
    runner = ExperimentRunner(cfg, Path(out_dir or settings.DBC_OUT_DIR))
    logger.info(f"🚀 Running '{subcommand}' (env={cfg.env}, seed={cfg.seed}, digest={cfg.digest})")
    start = time.perf_counter()

    if subcommand == "gen-demos":
        runner.gen_demos()
    elif subcommand == "train-dm":
        runner.train_dm()
    elif subcommand == "train-policy":
        runner.train_policy()
    elif subcommand == "train-baseline":
        if method is None:
            raise ConfigError("train-baseline needs --method")
        runner.train_baseline(method)
    elif subcommand == "eval":
        runner.eval(method or "dbc", band)
    else:
        getattr(runner, subcommand.replace("-", "_"))()

    total = time.perf_counter() - start
    logger.info(f"✅ '{subcommand}' finished in {total:.1f}s")
    if show_summary:
        runner.print_summary(subcommand, total)
    return runner.artifacts
