"""Stateless forward/backward kernels.

Conventions: a batch is the leading axis.  Dense weights are stored
``(fan_in, fan_out)`` so ``y = x @ W + b``.  Conv1d inputs are
``(batch, length, channels)`` and filters ``(k, in_channels, n_filters)``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..phy import StructureError


def as_float(x):
    """``x`` as an array, keeping float32/float64 and promoting anything else to float64."""
    x = np.asarray(x)
    return x if x.dtype in (np.float32, np.float64) else x.astype(np.float64)


def relu(z):
    return np.maximum(z, 0.0)


def relu_grad(z):
    return (z > 0).astype(np.float64)


def sigmoid(z):
    # scipy's logistic ufunc is overflow-safe for large |z|
    return expit(as_float(z))


def sigmoid_grad(z):
    s = sigmoid(z)
    return s * (1.0 - s)


def softmax(z):
    z = as_float(z)
    e = z - z.max(axis=-1, keepdims=True)
    np.exp(e, out=e)
    e /= e.sum(axis=-1, keepdims=True)
    return e


def softmax_backward(s, grad_out):
    """Vector-Jacobian product of softmax given its output ``s``."""
    return s * (grad_out - np.sum(grad_out * s, axis=-1, keepdims=True))


def dense_forward(x, weights, bias):
    x = np.asarray(x)
    if x.shape[-1] != weights.shape[0]:
        raise StructureError(f"dense layer expects {weights.shape[0]} inputs, got {x.shape[-1]}")
    out = x @ weights
    out += bias
    return out


def dense_backward(x, weights, grad_out, l2: float = 0.0):
    """Gradients w.r.t. (x, W, b); ``l2`` adds the lambda * W weight-decay term."""
    dx = grad_out @ weights.T
    dw = x.T @ grad_out
    if l2:
        dw = dw + l2 * weights
    db = grad_out.sum(axis=0)
    return dx, dw, db


def _same_pad(k: int):
    left = (k - 1) // 2
    return left, k - 1 - left


def _im2col(x, k):
    if k == 1:
        return x
    left, _ = _same_pad(k)
    xp = np.zeros((x.shape[0], x.shape[1] + k - 1, x.shape[2]), dtype=x.dtype)
    xp[:, left:left + x.shape[1]] = x
    # (batch, length, channels, k) -> (batch, length, k, channels)
    win = sliding_window_view(xp, k, axis=1).transpose(0, 1, 3, 2)
    return win.reshape(x.shape[0], x.shape[1], k * x.shape[2])


def conv1d_forward(x, filters, bias):
    """'Same'-padded cross-correlation along the length axis."""
    x = as_float(x)
    if x.ndim != 3:
        raise StructureError(f"conv1d input must be (batch, length, channels), got shape {x.shape}")
    k, c_in, n = filters.shape
    if x.shape[2] != c_in:
        raise StructureError(f"conv1d filters span {c_in} channels, input has {x.shape[2]}")
    batch, length, _ = x.shape
    out = _im2col(x, k).reshape(batch * length, k * c_in) @ filters.reshape(k * c_in, n)
    out += bias
    return out.reshape(batch, length, n)


def conv1d_backward(x, filters, grad_out, l2: float = 0.0):
    x = np.asarray(x, dtype=np.float64)
    k, c_in, n = filters.shape
    batch, length, _ = x.shape
    cols = _im2col(x, k).reshape(batch * length, k * c_in)
    g = grad_out.reshape(batch * length, n)
    dw = (cols.T @ g).reshape(k, c_in, n)
    if l2:
        dw = dw + l2 * filters
    db = g.sum(axis=0)
    dcols = (g @ filters.reshape(k * c_in, n).T).reshape(batch, length, k, c_in)
    left, _ = _same_pad(k)
    dxp = np.zeros((batch, length + k - 1, c_in))
    for j in range(k):
        dxp[:, j:j + length] += dcols[:, :, j]
    return dxp[:, left:left + length], dw, db


def mse_loss(y, y_hat):
    """J = 1/2 sum (y - y_hat)^2 and dJ/dy_hat."""
    y, y_hat = np.asarray(y, dtype=np.float64), np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise StructureError(f"loss shapes differ: {y.shape} vs {y_hat.shape}")
    diff = y_hat - y
    return 0.5 * float(np.sum(diff * diff)), diff


PROB_FLOOR = 1e-12


def cross_entropy_loss(one_hot, probs):
    """Categorical cross-entropy -sum y log(p) and dJ/dp, with p clamped to [1e-12, 1]."""
    one_hot = np.asarray(one_hot, dtype=np.float64)
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_FLOOR, 1.0)
    return float(-np.sum(one_hot * np.log(p))), -one_hot / p


def binary_accuracy(y, y_hat, threshold: float = 0.5) -> float:
    y, y_hat = np.asarray(y), np.asarray(y_hat)
    if y.shape != y_hat.shape:
        raise StructureError(f"accuracy shapes differ: {y.shape} vs {y_hat.shape}")
    return float(np.mean((y_hat > threshold) == (y > threshold)))
