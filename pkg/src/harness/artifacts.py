"""
Save / load trained models of every kind as single-network checkpoints.
"""
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.dbc.models import Policy
from src.diffusion.model import NoiseModel
from src.diffusion.schedule import DiffusionSchedule
from src.errors import FormatError
from src.guidance.models import CondDiffusionPolicy, EnergyModel
from src.harness.checkpoint import HEADER_SIZE, load_checkpoint, save_checkpoint
from src.harness.dataset import NormStats
from src.utils import PathLike

logger = logging.getLogger(__name__)

KINDS = ("noise_model", "policy", "energy", "diffusion_policy")


def _kind_of(obj) -> str:
    if isinstance(obj, NoiseModel):
        return "noise_model"
    if isinstance(obj, Policy):
        return "policy"
    if isinstance(obj, EnergyModel):
        return "energy"
    if isinstance(obj, CondDiffusionPolicy):
        return "diffusion_policy"
    raise TypeError(f"Cannot checkpoint {type(obj).__name__}")


def save_artifact(path: PathLike, obj, role: str, config_digest: str,
                  norm_stats: Optional[NormStats] = None) -> Path:
    kind = _kind_of(obj)
    norm = norm_stats if norm_stats is not None else getattr(obj, "norm", None)
    meta: Dict[str, Any] = {
        "kind": kind,
        "role": role,
        "config_digest": config_digest,
        "state_dim": obj.state_dim,
        "action_dim": obj.action_dim,
        "norm_stats": norm.model_dump() if norm is not None else None,
    }
    if kind in ("noise_model", "diffusion_policy"):
        meta["beta"] = [float(b) for b in obj.sched.beta]
    if kind == "noise_model":
        meta["train_info"] = dict(obj.metadata)
    return save_checkpoint(path, obj.net, meta)


def load_artifact(path: PathLike, expected_kind: Optional[str] = None,
                  stage: Optional[str] = None) -> Tuple[Any, Dict[str, Any]]:
    """Rebuild the saved object and return it with its metadata; guides come back frozen."""
    net, meta = load_checkpoint(path, stage=stage)
    kind = meta.get("kind")
    if kind not in KINDS or (expected_kind is not None and kind != expected_kind):
        raise FormatError(f"Checkpoint {path} holds '{kind}', expected '{expected_kind or ' | '.join(KINDS)}'",
                          offset=HEADER_SIZE)
    norm = NormStats(**meta["norm_stats"]) if meta.get("norm_stats") else None
    s_dim, a_dim = int(meta["state_dim"]), int(meta["action_dim"])

    if kind == "noise_model":
        sched = DiffusionSchedule(np.asarray(meta["beta"], dtype=np.float64))
        obj = NoiseModel(net, s_dim, a_dim, sched, metadata=meta.get("train_info")).freeze()
    elif kind == "policy":
        obj = Policy(net, s_dim, a_dim, norm)
    elif kind == "energy":
        obj = EnergyModel(net, s_dim, a_dim, norm).freeze()
    else:
        sched = DiffusionSchedule(np.asarray(meta["beta"], dtype=np.float64))
        obj = CondDiffusionPolicy(net, sched, s_dim, a_dim, norm)
    logger.info(f"📦 Loaded {kind} ({meta.get('role')}) from {path}")
    return obj, meta
