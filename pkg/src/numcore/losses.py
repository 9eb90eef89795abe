from typing import Tuple

import numpy as np

from src.numcore.matrix import Matrix, as_matrix, check_same_shape


def mse_loss(pred: Matrix, target: Matrix) -> Tuple[float, Matrix]:
    """Mean over every element of (pred - target)^2, with d loss / d pred."""
    pred = as_matrix(pred, name="prediction")
    target = as_matrix(target, name="target")
    check_same_shape(pred, target, "mse")
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logits(logits: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean binary cross entropy on logits; stable for large |logit|."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    check_same_shape(z, y, "bce")
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return float(np.mean(loss)), (sigmoid(z) - y) / z.size


def logsumexp(x: np.ndarray, axis: int = -1) -> np.ndarray:
    top = np.max(x, axis=axis, keepdims=True)
    return np.squeeze(top, axis=axis) + np.log(np.sum(np.exp(x - top), axis=axis))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = np.exp(x - np.max(x, axis=axis, keepdims=True))
    return shifted / np.sum(shifted, axis=axis, keepdims=True)
