import hashlib
import os
import tempfile
from pathlib import Path
from typing import Union

PathLike = Union[str, Path]


def digest_text(text: str) -> str:
    """Short stable digest of a canonical text rendering."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def format_sig(value: float, digits: int) -> str:
    """Format a float with a fixed number of significant digits."""
    return format(float(value), f".{digits}g")


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """Write a whole file via temp file + rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))
