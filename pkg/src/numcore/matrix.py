"""
Dense-matrix helpers. A Matrix is a 2-D float64 numpy array (rows x cols, row-major).
"""
from typing import Optional

import numpy as np

from src.errors import NumericalError, ShapeError

Matrix = np.ndarray


def as_matrix(x, cols: Optional[int] = None, name: str = "input") -> Matrix:
    """Coerce to a 2-D float64 array, optionally checking the column count."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if cols is not None and arr.shape[1] != cols:
        raise ShapeError(f"{name} has {arr.shape[1]} columns, expected {cols}")
    return arr


def check_same_shape(a: Matrix, b: Matrix, what: str = "operands"):
    if a.shape != b.shape:
        raise ShapeError(f"{what} shape mismatch: {a.shape} vs {b.shape}")


def check_finite(x, what: str = "value"):
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"{what} contains NaN or Inf")
    return x
