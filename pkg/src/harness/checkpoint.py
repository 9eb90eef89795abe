"""
Binary checkpoint format for one network:

    b"DBCCKPT1" | uint32 LE metadata length | UTF-8 JSON metadata | float64 LE params

Metadata always carries `layer_dims` and `activations`; callers add the rest
(role, norm stats, config digest, ...). JSON is written with sorted keys so equal
inputs give equal bytes.
"""
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.errors import DependencyError, FormatError
from src.numcore import MlpModel
from src.numcore.activations import ACTIVATIONS
from src.numcore.mlp import param_count
from src.utils import PathLike, atomic_write_bytes

logger = logging.getLogger(__name__)

MAGIC = b"DBCCKPT1"
_LEN = struct.Struct("<I")
HEADER_SIZE = len(MAGIC) + _LEN.size


def encode_checkpoint(model: MlpModel, metadata: Optional[Dict[str, Any]] = None) -> bytes:
    meta = dict(metadata or {})
    meta["layer_dims"] = list(model.layer_dims)
    meta["activations"] = list(model.activations)
    text = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + _LEN.pack(len(text)) + text + model.params.astype("<f8").tobytes()


def decode_checkpoint(raw: bytes) -> Tuple[Dict[str, Any], np.ndarray]:
    if raw[:len(MAGIC)] != MAGIC:
        raise FormatError("Bad checkpoint magic", offset=0)
    if len(raw) < HEADER_SIZE:
        raise FormatError("Truncated metadata length", offset=len(MAGIC))
    (meta_len,) = _LEN.unpack_from(raw, len(MAGIC))
    meta_end = HEADER_SIZE + meta_len
    if len(raw) < meta_end:
        raise FormatError("Truncated metadata", offset=HEADER_SIZE)
    try:
        meta = json.loads(raw[HEADER_SIZE:meta_end].decode("utf-8"))
        dims = [int(d) for d in meta["layer_dims"]]
        activations = meta["activations"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError):
        raise FormatError("Unreadable checkpoint metadata", offset=HEADER_SIZE)
    if len(dims) < 2 or min(dims) < 1:
        raise FormatError(f"Invalid layer dims {dims}", offset=HEADER_SIZE)
    if (not isinstance(activations, list) or len(activations) != len(dims) - 2
            or not all(isinstance(tag, str) and tag in ACTIVATIONS for tag in activations)):
        raise FormatError(f"Invalid activation tags {activations!r} for dims {dims}", offset=HEADER_SIZE)

    body = raw[meta_end:]
    expected = param_count(dims) * 8
    if len(body) != expected:
        raise FormatError(f"Expected {expected} parameter bytes, found {len(body)}", offset=meta_end)
    return meta, np.frombuffer(body, dtype="<f8").astype(np.float64)


def save_checkpoint(path: PathLike, model: MlpModel, metadata: Optional[Dict[str, Any]] = None) -> Path:
    out = atomic_write_bytes(path, encode_checkpoint(model, metadata))
    logger.info(f"📦 Checkpoint saved to {out} ({model.params.size} params)")
    return out


def load_checkpoint(path: PathLike, model: Optional[MlpModel] = None,
                    stage: Optional[str] = None) -> Tuple[MlpModel, Dict[str, Any]]:
    """
    Read a checkpoint. With `model`, its layer dims must match and its params are
    overwritten in place; otherwise a new network is built from the metadata.
    """
    path = Path(path)
    if not path.exists():
        raise DependencyError(str(path), stage=stage)
    meta, params = decode_checkpoint(path.read_bytes())
    if model is None:
        model = MlpModel(meta["layer_dims"], meta["activations"], params)
    else:
        if list(model.layer_dims) != list(meta["layer_dims"]):
            raise FormatError(
                f"Checkpoint dims {meta['layer_dims']} do not match model dims {model.layer_dims}",
                offset=HEADER_SIZE,
            )
        model.params[...] = params
        model.zero_grad()
    return model, meta
