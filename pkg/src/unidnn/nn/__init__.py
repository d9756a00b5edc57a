"""A small numpy neural-network engine (dense, conv1d, dropout, ADAM)."""

from .functional import (binary_accuracy, conv1d_backward, conv1d_forward, cross_entropy_loss,
                         dense_backward, dense_forward, mse_loss, relu, relu_grad, sigmoid,
                         sigmoid_grad, softmax)
from .layers import Conv1D, Dense, Dropout, Flatten, Layer
from .network import Network, mlp
from .optim import AdamState, adam_step
from .training import TrainConfig, TrainingError, TrainReport, train

__all__ = [
    "AdamState", "Conv1D", "Dense", "Dropout", "Flatten", "Layer", "Network", "TrainConfig",
    "TrainReport", "TrainingError", "adam_step", "binary_accuracy", "conv1d_backward",
    "conv1d_forward", "cross_entropy_loss", "dense_backward", "dense_forward", "mlp", "mse_loss",
    "relu", "relu_grad", "sigmoid", "sigmoid_grad", "softmax", "train",
]
