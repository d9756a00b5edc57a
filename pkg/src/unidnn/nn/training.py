from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..phy import StructureError
from . import functional as F
from .network import Network
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    l2: float = 2e-6
    batch_size: int = 3000
    epochs: int = 700
    train_fraction: float = 0.7
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be positive and epochs non-negative")


@dataclass
class TrainReport:
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    val_accuracy: List[float] = field(default_factory=list)
    best_epoch: int = -1
    train_indices: Optional[np.ndarray] = None
    val_indices: Optional[np.ndarray] = None

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch] if self.best_epoch >= 0 else float("nan")


def split_indices(n: int, train_fraction: float, rng: np.random.Generator):
    perm = rng.permutation(n)
    n_train = int(round(train_fraction * n))
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def evaluate(net: Network, x, y):
    out = net.predict(x)
    loss, _ = net.loss_and_grad(y, out)
    return loss, F.binary_accuracy(y, out)


def train(net: Network, x, y, cfg: TrainConfig, on_epoch=None) -> TrainReport:
    """Mini-batch ADAM with a seeded train/validation split.

    The parameters with the lowest validation loss are restored at the end.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) == 0 or len(x) != len(y):
        raise StructureError(f"dataset has {len(x)} inputs and {len(y)} labels")
    if y.shape[1] != net.output_width:
        raise StructureError(f"labels are {y.shape[1]} wide, network outputs {net.output_width}")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    tr, va = split_indices(len(x), cfg.train_fraction, rng)
    if cfg.batch_size > len(tr):
        raise StructureError(f"batch size {cfg.batch_size} exceeds {len(tr)} training samples")
    x_val, y_val = x[va], y[va]
    report = TrainReport(train_indices=tr, val_indices=va)
    state = AdamState()
    params = {}
    best, best_params = np.inf, net.get_params()
    net.version += 1  # parameters are about to change in place

    for epoch in range(cfg.epochs):
        order = tr[rng.permutation(len(tr))]
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            out = net.forward(x[idx], training=True, rng=rng)
            loss = net.backward(y[idx], out, cfg.l2)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at epoch {epoch}, batch offset {start}")
            total += loss * len(idx)
            grads = {}
            for key, layer, name in net.parameters():
                params[key] = layer.params[name]
                grads[key] = layer.grads[name]
            adam_step(params, grads, state, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
        report.train_loss.append(total / len(tr))
        if len(va):
            vloss, vacc = evaluate(net, x_val, y_val)
        else:
            vloss, vacc = report.train_loss[-1], float("nan")
        if not np.isfinite(vloss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        report.val_loss.append(vloss)
        report.val_accuracy.append(vacc)
        if vloss < best:
            best, best_params, report.best_epoch = vloss, net.get_params(), epoch
        if on_epoch is not None:
            on_epoch(epoch, report)
        log.debug("epoch %d train %.5f val %.5f acc %.4f", epoch, report.train_loss[-1], vloss, vacc)

    net.set_params(best_params)
    return report
