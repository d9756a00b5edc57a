from __future__ import annotations

from typing import Dict, Optional

import numpy as np

from ..phy import StructureError
from . import functional as F

ACTIVATIONS = ("relu", "sigmoid", "softmax", "none")


class Layer:
    """Base class.  Parameters live in ``params``; ``backward`` fills ``grads``."""

    kind = "layer"

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}

    def forward(self, x, training: bool = False, rng: Optional[np.random.Generator] = None):
        raise NotImplementedError

    def backward(self, grad_out, l2: float = 0.0):
        raise NotImplementedError

    def spec(self) -> dict:
        return {"kind": self.kind}

    def output_shape(self, input_shape):
        return input_shape


class _Activated(Layer):
    """Mixin for layers that apply an elementwise activation after an affine map."""

    def __init__(self, activation: str):
        super().__init__()
        if activation not in ACTIVATIONS:
            raise StructureError(f"unknown activation {activation!r}")
        self.activation = activation

    def _activate(self, z):
        self._z = z
        if self.activation == "relu":
            out = F.relu(z)
        elif self.activation == "sigmoid":
            out = F.sigmoid(z)
        elif self.activation == "softmax":
            out = F.softmax(z)
        else:
            out = z
        self._a = out
        return out

    def _activation_backward(self, grad_out):
        if self.activation == "relu":
            return grad_out * (self._z > 0)
        if self.activation == "sigmoid":
            return grad_out * self._a * (1.0 - self._a)
        if self.activation == "softmax":
            return F.softmax_backward(self._a, grad_out)
        return grad_out


def _init_limit(fan_in: int, fan_out: int, activation: str) -> float:
    if activation == "relu":
        return np.sqrt(6.0 / fan_in)  # He uniform
    return np.sqrt(6.0 / (fan_in + fan_out))  # Glorot uniform


class Dense(_Activated):
    kind = "dense"

    def __init__(self, fan_in: int, fan_out: int, activation: str = "none",
                 rng: Optional[np.random.Generator] = None):
        super().__init__(activation)
        self.fan_in, self.fan_out = int(fan_in), int(fan_out)
        rng = rng or np.random.default_rng(0)
        lim = _init_limit(self.fan_in, self.fan_out, activation)
        self.params = {
            "W": rng.uniform(-lim, lim, (self.fan_in, self.fan_out)),
            "b": np.zeros(self.fan_out),
        }

    def forward(self, x, training=False, rng=None):
        self._x = x
        return self._activate(F.dense_forward(x, self.params["W"], self.params["b"]))

    def backward(self, grad_out, l2=0.0, pre_activation=False):
        g = grad_out if pre_activation else self._activation_backward(grad_out)
        dx, dw, db = F.dense_backward(self._x, self.params["W"], g, l2)
        self.grads = {"W": dw, "b": db}
        return dx

    def spec(self):
        return {"kind": self.kind, "fan_in": self.fan_in, "fan_out": self.fan_out,
                "activation": self.activation}

    def output_shape(self, input_shape):
        return (self.fan_out,)


class Conv1D(_Activated):
    kind = "conv1d"

    def __init__(self, in_channels: int, filters: int, kernel: int = 1, activation: str = "none",
                 rng: Optional[np.random.Generator] = None, padding: str = "same"):
        super().__init__(activation)
        if padding != "same":
            raise StructureError("only 'same' padding is supported")
        self.in_channels, self.filters, self.kernel = int(in_channels), int(filters), int(kernel)
        rng = rng or np.random.default_rng(0)
        fan_in = self.kernel * self.in_channels
        lim = _init_limit(fan_in, self.kernel * self.filters, activation)
        self.params = {
            "W": rng.uniform(-lim, lim, (self.kernel, self.in_channels, self.filters)),
            "b": np.zeros(self.filters),
        }

    def forward(self, x, training=False, rng=None):
        self._x = x
        return self._activate(F.conv1d_forward(x, self.params["W"], self.params["b"]))

    def backward(self, grad_out, l2=0.0, pre_activation=False):
        g = grad_out if pre_activation else self._activation_backward(grad_out)
        dx, dw, db = F.conv1d_backward(self._x, self.params["W"], g, l2)
        self.grads = {"W": dw, "b": db}
        return dx

    def spec(self):
        return {"kind": self.kind, "in_channels": self.in_channels, "filters": self.filters,
                "kernel": self.kernel, "padding": "same", "activation": self.activation}

    def output_shape(self, input_shape):
        return (input_shape[0], self.filters)


class Dropout(Layer):
    """Inverted dropout: survivors are scaled by 1/(1-p) during training only."""

    kind = "dropout"

    def __init__(self, rate: float):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise StructureError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = float(rate)

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise StructureError("dropout in training mode needs an rng")
        self._mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, grad_out, l2=0.0):
        return grad_out if self._mask is None else grad_out * self._mask

    def spec(self):
        return {"kind": self.kind, "rate": self.rate}


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x, training=False, rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out, l2=0.0):
        return grad_out.reshape(self._shape)

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)


def layer_from_spec(spec: dict) -> Layer:
    kind = spec["kind"]
    if kind == "dense":
        return Dense(spec["fan_in"], spec["fan_out"], spec["activation"])
    if kind == "conv1d":
        return Conv1D(spec["in_channels"], spec["filters"], spec["kernel"], spec["activation"])
    if kind == "dropout":
        return Dropout(spec["rate"])
    if kind == "flatten":
        return Flatten()
    raise StructureError(f"unknown layer kind {kind!r}")
