from contextlib import contextmanager
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import ShapeError, StateError
from src.numcore.activations import get_activation
from src.numcore.matrix import Matrix, as_matrix


def param_count(layer_dims: Sequence[int]) -> int:
    return sum(i * o + o for i, o in zip(layer_dims[:-1], layer_dims[1:]))


class MlpModel:
    """
    Fully connected network over a single flat parameter vector.

    Layout is layer order, each layer as W (in x out, row-major) followed by b (out).
    Hidden layers use the tagged activation; the output layer is linear.
    `forward` caches activations so `backward` can accumulate into `grads` and
    return d loss / d input. A frozen model (trainable=False) still returns input
    gradients but never touches `grads`.
    """

    def __init__(
        self,
        layer_dims: Sequence[int],
        activation: Union[str, Sequence[str]] = "relu",
        params: Optional[np.ndarray] = None,
    ):
        if len(layer_dims) < 2 or any(int(d) < 1 for d in layer_dims):
            raise ShapeError(f"Invalid layer dims {list(layer_dims)}")
        self.layer_dims: List[int] = [int(d) for d in layer_dims]
        n_hidden = len(self.layer_dims) - 2
        if isinstance(activation, str):
            self.activations: List[str] = [activation] * n_hidden
        else:
            self.activations = list(activation)
        if len(self.activations) != n_hidden:
            raise ShapeError(f"Need {n_hidden} activation tags, got {len(self.activations)}")
        self._act_fns = [get_activation(tag) for tag in self.activations]

        size = param_count(self.layer_dims)
        if params is None:
            self.params = np.zeros(size, dtype=np.float64)
        else:
            params = np.asarray(params, dtype=np.float64).ravel()
            if params.size != size:
                raise ShapeError(f"Expected {size} parameters, got {params.size}")
            self.params = params.copy()
        self.grads = np.zeros(size, dtype=np.float64)
        self.trainable = True
        self._cache: Optional[Tuple[List[Matrix], List[Matrix]]] = None

    @classmethod
    def initialize(cls, layer_dims: Sequence[int], activation, rng) -> "MlpModel":
        """Glorot-uniform weights, zero biases."""
        model = cls(layer_dims, activation)
        for W, b in model.layers():
            fan_in, fan_out = W.shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            W[...] = rng.uniform(-limit, limit, fan_in, fan_out)
            b[...] = 0.0
        return model

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def layers(self, buffer: Optional[np.ndarray] = None) -> List[Tuple[np.ndarray, np.ndarray]]:
        """(W, b) views into `buffer` (params by default), so writes land in the flat vector."""
        buf = self.params if buffer is None else buffer
        views = []
        offset = 0
        for i, o in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            W = buf[offset:offset + i * o].reshape(i, o)
            offset += i * o
            b = buf[offset:offset + o]
            offset += o
            views.append((W, b))
        return views

    def _run(self, x: Matrix, keep: bool) -> Matrix:
        x = as_matrix(x, cols=self.in_dim)
        inputs, pre = [], []
        h = x
        last = len(self.layer_dims) - 2
        for k, (W, b) in enumerate(self.layers()):
            if keep:
                inputs.append(h)
            z = h @ W + b
            if k < last:
                fn, _ = self._act_fns[k]
                if keep:
                    pre.append(z)
                h = fn(z)
            else:
                h = z
        if keep:
            self._cache = (inputs, pre)
        return h

    def forward(self, x: Matrix) -> Matrix:
        """Batched forward pass; caches activations for `backward`."""
        return self._run(x, keep=True)

    def predict(self, x: Matrix) -> Matrix:
        """Forward pass without caching. Safe to call from concurrent readers."""
        return self._run(x, keep=False)

    def backward(self, grad_out: Matrix) -> Matrix:
        """Accumulate d loss / d params into `grads` and return d loss / d input."""
        if self._cache is None:
            raise StateError("backward called before forward")
        inputs, pre = self._cache
        g = as_matrix(grad_out, cols=self.out_dim, name="upstream gradient")
        if g.shape[0] != inputs[0].shape[0]:
            raise ShapeError(f"Upstream gradient has {g.shape[0]} rows, batch had {inputs[0].shape[0]}")

        param_views = self.layers()
        grad_views = self.layers(self.grads)
        for k in range(len(param_views) - 1, -1, -1):
            W, _ = param_views[k]
            if self.trainable:
                dW, db = grad_views[k]
                dW += inputs[k].T @ g
                db += g.sum(axis=0)
            g = g @ W.T
            if k > 0:
                _, dfn = self._act_fns[k - 1]
                z = pre[k - 1]
                g = g * dfn(z, inputs[k])
        self._cache = None
        return g

    def zero_grad(self):
        self.grads[...] = 0.0

    def freeze(self) -> "MlpModel":
        self.trainable = False
        self._cache = None
        return self



@contextmanager
def frozen(model: MlpModel):
    """Temporarily freeze a model, restoring its previous trainable flag."""
    previous = model.trainable
    model.trainable = False
    try:
        yield model
    finally:
        model.trainable = previous


def mlp_forward(model: MlpModel, input: Matrix) -> Matrix:
    return model.forward(input)


def mlp_backward(model: MlpModel, loss_grad_wrt_output: Matrix) -> Matrix:
    return model.backward(loss_grad_wrt_output)
