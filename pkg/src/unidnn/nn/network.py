from __future__ import annotations

from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..phy import StructureError
from . import functional as F
from .layers import Dense, Layer, layer_from_spec


class Network:
    """A sequential stack of layers with a fixed per-sample input shape."""

    def __init__(self, layers: Sequence[Layer], input_shape: Tuple[int, ...], loss: str = "mse"):
        if loss not in ("mse", "cross_entropy"):
            raise StructureError(f"unknown loss {loss!r}")
        self.layers: List[Layer] = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.loss = loss
        # bumped whenever parameters are replaced, so derived copies can tell they are stale
        self.version = 0

    @property
    def dtype(self):
        for _, layer, name in self.parameters():
            return layer.params[name].dtype
        return np.dtype(np.float64)

    @property
    def output_width(self) -> int:
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
        return int(np.prod(shape))

    def _check_input(self, x):
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[1:] != self.input_shape:
            raise StructureError(
                f"network expects per-sample input shape {self.input_shape}, got {x.shape[1:]}"
            )
        return x

    def forward(self, x, training: bool = False, rng: Optional[np.random.Generator] = None):
        return self._run(self._check_input(x), training, rng)

    def _run(self, x, training=False, rng=None):
        for layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
        return x

    def predict(self, x, batch_size: int = 8192):
        """Inference pass with dropout disabled."""
        x = self._check_input(x)
        if len(x) <= batch_size:
            return self._run(x)
        return np.concatenate([self._run(x[i:i + batch_size]) for i in range(0, len(x), batch_size)])

    def loss_and_grad(self, y, y_hat):
        """Mean per-sample loss and its gradient w.r.t. the network output."""
        n = len(y)
        if self.loss == "mse":
            j, g = F.mse_loss(y, y_hat)
        else:
            j, g = F.cross_entropy_loss(y, y_hat)
        return j / n, g / n

    def backward(self, y, y_hat, l2: float = 0.0) -> float:
        """Backpropagate the loss of ``y_hat`` (the last forward output) against ``y``.

        Softmax followed by cross-entropy uses the fused gradient ``y_hat - y``.
        """
        loss, grad = self.loss_and_grad(y, y_hat)
        last = self.layers[-1]
        fused = self.loss == "cross_entropy" and getattr(last, "activation", None) == "softmax"
        if fused:
            grad = (np.asarray(y_hat) - y) / len(y)
        for i, layer in enumerate(reversed(self.layers)):
            if i == 0 and fused:
                grad = layer.backward(grad, l2, pre_activation=True)
            else:
                grad = layer.backward(grad, l2)
        return loss

    def parameters(self) -> Iterator[Tuple[str, Layer, str]]:
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                yield f"{i}.{name}", layer, name

    def get_params(self) -> dict:
        return {key: layer.params[name].copy() for key, layer, name in self.parameters()}

    def set_params(self, values: dict):
        for key, layer, name in self.parameters():
            if values[key].shape != layer.params[name].shape:
                raise StructureError(f"parameter {key} has shape {values[key].shape}, "
                                     f"expected {layer.params[name].shape}")
            layer.params[name] = np.array(values[key], dtype=np.float64)
        self.version += 1

    def astype(self, dtype) -> "Network":
        """An independent copy with every parameter cast to ``dtype`` (for inference)."""
        net = Network.from_specs(self.specs(), self.input_shape, self.loss)
        for (_, src, name), (_, dst, _) in zip(self.parameters(), net.parameters()):
            dst.params[name] = np.ascontiguousarray(src.params[name], dtype=dtype)
        return net

    def specs(self) -> list:
        return [layer.spec() for layer in self.layers]

    @classmethod
    def from_specs(cls, specs, input_shape, loss="mse") -> "Network":
        return cls([layer_from_spec(s) for s in specs], input_shape, loss)

    def n_parameters(self) -> int:
        return sum(layer.params[name].size for _, layer, name in self.parameters())


def mlp(n_in: int, n_hidden: int, n_out: int, output: str = "sigmoid", dropout: float = 0.0,
        rng: Optional[np.random.Generator] = None, loss: Optional[str] = None) -> Network:
    """One-hidden-layer perceptron: n_in -> n_hidden (ReLU) -> n_out."""
    from .layers import Dropout

    rng = rng or np.random.default_rng(0)
    layers: List[Layer] = [Dense(n_in, n_hidden, "relu", rng)]
    if dropout:
        layers.append(Dropout(dropout))
    layers.append(Dense(n_hidden, n_out, output, rng))
    if loss is None:
        loss = "cross_entropy" if output == "softmax" else "mse"
    return Network(layers, (n_in,), loss)
