from typing import Callable, Dict, Tuple

import numpy as np

from src.errors import ConfigError

LEAKY_SLOPE = 0.01


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, out):
    return (z > 0).astype(np.float64)


def _tanh(z):
    return np.tanh(z)


def _tanh_grad(z, out):
    return 1.0 - out * out


def _leaky_relu(z):
    return np.where(z > 0, z, LEAKY_SLOPE * z)


def _leaky_relu_grad(z, out):
    return np.where(z > 0, 1.0, LEAKY_SLOPE)


# tag -> (forward, derivative given pre-activation and output)
ACTIVATIONS: Dict[str, Tuple[Callable, Callable]] = {
    "relu": (_relu, _relu_grad),
    "tanh": (_tanh, _tanh_grad),
    "leaky_relu": (_leaky_relu, _leaky_relu_grad),
}


def get_activation(tag: str) -> Tuple[Callable, Callable]:
    try:
        return ACTIVATIONS[tag]
    except KeyError:
        raise ConfigError(f"Unknown activation '{tag}'. Choose from {sorted(ACTIVATIONS)}")
