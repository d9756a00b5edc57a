"""Neural receivers: single/multi-channel DNNs and the cascaded Uni-DNN variants.

Every detector maps the received subcarriers of one OFDM symbol to the
``2 * (n_sub - N_p)`` data bits.  The Uni-DNN variants first run a channel
classifier and hand its decision to the detector:

* ``UniA`` appends the 5-way class vector to the 128 features (133 inputs).
* ``UniB`` routes the features into column ``c`` of a 128 x 5 grid and
  flattens it (640 inputs), so each class gets its own first-layer weights.
* ``UniC`` runs a 'same'-padded conv1d over that grid, treating the five
  columns as input channels, before flattening.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .channels import N_CHAN, ChannelClass
from .nn import checkpoint
from .nn import functional as F
from .nn.layers import Conv1D, Dense, Dropout, Flatten
from .nn.network import Network, mlp
from .nn.training import TrainConfig, TrainReport, train
from .phy import StructureError

N_IN = 128


class Arch(str, enum.Enum):
    Single = "Single"
    Multi = "Multi"
    UniA = "UniA"
    UniB = "UniB"
    UniC = "UniC"

    @property
    def cascaded(self) -> bool:
        return self in (Arch.UniA, Arch.UniB, Arch.UniC)

    @classmethod
    def parse(cls, tag) -> "Arch":
        try:
            return cls(tag)
        except ValueError:
            raise StructureError(f"unknown architecture {tag!r}") from None


INFERENCE_DTYPE = np.float32


def featurize(y) -> np.ndarray:
    """Real parts of the 64 subcarriers followed by their imaginary parts."""
    y = np.asarray(y)
    if y.shape[-1] != N_IN // 2:
        raise StructureError(f"expected {N_IN // 2} subcarriers, got {y.shape[-1]}")
    return np.concatenate([y.real, y.imag], axis=-1).astype(np.float64)


def n_outputs(n_pilots: int) -> int:
    return 2 * (N_IN // 2 - n_pilots)


def detector_input_shape(arch) -> tuple:
    arch = Arch.parse(arch)
    if arch is Arch.UniA:
        return (N_IN + N_CHAN,)
    if arch in (Arch.UniB, Arch.UniC):
        return (N_IN, N_CHAN)
    return (N_IN,)


def build_grid_input(features, class_vec, routing: str = "hard") -> np.ndarray:
    """Place the features in the column(s) of a ``(..., 128, 5)`` grid.

    Hard routing copies the features into the argmax column only; soft
    routing scales column ``j`` by the class probability ``c_j``.
    """
    features = F.as_float(features)
    class_vec = F.as_float(class_vec)
    if routing == "hard":
        flat = features.reshape(-1, features.shape[-1])
        grid = np.zeros(flat.shape + (class_vec.shape[-1],), dtype=np.result_type(features, class_vec))
        cols = np.argmax(class_vec.reshape(-1, class_vec.shape[-1]), axis=-1)
        grid[np.arange(len(flat)), :, cols] = flat
        return grid.reshape(features.shape + (class_vec.shape[-1],))
    if routing == "soft":
        return features[..., :, None] * class_vec[..., None, :]
    raise StructureError(f"unknown routing mode {routing!r}")


def one_hot_argmax(class_vec) -> np.ndarray:
    flat = class_vec.reshape(-1, class_vec.shape[-1])
    out = np.zeros_like(flat)
    out[np.arange(len(flat)), np.argmax(flat, axis=-1)] = 1.0
    return out.reshape(class_vec.shape)


def assemble_input(arch, features, class_vec=None, routing: str = "hard") -> np.ndarray:
    arch = Arch.parse(arch)
    features = F.as_float(features)
    if not arch.cascaded:
        return features
    if class_vec is None:
        raise StructureError(f"{arch.value} needs a channel-class vector")
    if arch is Arch.UniA:
        class_vec = F.as_float(class_vec)
        if routing == "hard":
            class_vec = one_hot_argmax(class_vec)
        elif routing != "soft":
            raise StructureError(f"unknown routing mode {routing!r}")
        return np.concatenate([features, class_vec.astype(features.dtype)], axis=-1)
    return build_grid_input(features, class_vec, routing)


def build_classifier(n_hid: int = 512, dropout: float = 0.01, rng=None) -> Network:
    return mlp(N_IN, n_hid, N_CHAN, output="softmax", dropout=dropout, rng=rng)


def build_detector(arch, n_pilots: int, n_hid: int = 512, dropout: float = 0.01,
                   kernel: int = 1, rng=None) -> Network:
    arch = Arch.parse(arch)
    n_out = n_outputs(n_pilots)
    rng = rng or np.random.default_rng(0)
    if arch in (Arch.Single, Arch.Multi):
        return mlp(N_IN, n_hid, n_out, dropout=dropout, rng=rng)
    if arch is Arch.UniA:
        return mlp(N_IN + N_CHAN, n_hid, n_out, dropout=dropout, rng=rng)
    layers = []
    if arch is Arch.UniC:
        layers.append(Conv1D(N_CHAN, N_CHAN, kernel, "relu", rng))
    layers.append(Flatten())
    layers.append(Dense(N_IN * N_CHAN, n_hid, "relu", rng))
    if dropout:
        layers.append(Dropout(dropout))
    layers.append(Dense(n_hid, n_out, "sigmoid", rng))
    return Network(layers, (N_IN, N_CHAN), "mse")


@dataclass
class NetworkBundle:
    """A detector, plus the channel classifier feeding it for Uni-DNN variants."""

    arch: Arch
    n_pilots: int
    detector: Network
    classifier: Optional[Network] = None
    routing: str = "hard"
    train_channel: Optional[str] = None  # Single only: the class it was trained on
    trained: bool = False
    reports: dict = field(default_factory=dict, repr=False)
    _fast: Optional[tuple] = field(default=None, init=False, repr=False, compare=False)

    @property
    def n_out(self) -> int:
        return n_outputs(self.n_pilots)

    def inference_networks(self, dtype=INFERENCE_DTYPE):
        """(detector, classifier) holding ``dtype`` copies of the trained weights.

        The copies are rebuilt whenever either network has been retrained.
        """
        if np.dtype(dtype) == np.float64:
            return self.detector, self.classifier
        nets = (self.detector, self.classifier)
        key = (np.dtype(dtype), tuple(None if n is None else (id(n), n.version) for n in nets))
        if self._fast is None or self._fast[0] != key:
            self._fast = (key, tuple(None if n is None else n.astype(dtype) for n in nets))
        return self._fast[1]


def build_bundle(arch, n_pilots: int, n_hid: int = 512, dropout: float = 0.01, kernel: int = 1,
                 routing: str = "hard", classifier: Optional[Network] = None, seed: int = 0,
                 train_channel=None) -> NetworkBundle:
    arch = Arch.parse(arch)
    rng = np.random.default_rng(seed)
    if arch.cascaded and classifier is None:
        classifier = build_classifier(n_hid, dropout, rng)
    det = build_detector(arch, n_pilots, n_hid, dropout, kernel, rng)
    if arch is Arch.Single and train_channel is not None:
        train_channel = ChannelClass.parse(train_channel).name
    return NetworkBundle(arch, n_pilots, det, classifier if arch.cascaded else None, routing, train_channel)


def classify(classifier: Network, features) -> np.ndarray:
    return classifier.predict(features)


def train_classifier(classifier: Network, features, class_labels, cfg: TrainConfig) -> TrainReport:
    return train(classifier, features, class_labels, cfg)


def train_detector(bundle: NetworkBundle, features, bits, cfg: TrainConfig, class_labels=None,
                   use_predictions: bool = True) -> TrainReport:
    """Stage 2: fit the detector with the classifier held fixed.

    Cascaded inputs are assembled from the classifier's predictions unless
    ``use_predictions`` is False, in which case the ground-truth
    ``class_labels`` are routed instead.
    """
    class_vec = None
    if bundle.arch.cascaded:
        if use_predictions:
            class_vec = classify(bundle.classifier, features)
        else:
            if class_labels is None:
                raise StructureError("ground-truth routing needs class labels")
            class_vec = np.asarray(class_labels, dtype=np.float64)
    x = assemble_input(bundle.arch, features, class_vec, bundle.routing)
    report = train(bundle.detector, x, bits, cfg)
    bundle.reports["detector"] = report
    bundle.trained = True
    return report


def train_two_stage(bundle: NetworkBundle, features, bits, class_labels, cfg_classifier: TrainConfig,
                    cfg_detector: TrainConfig, use_predictions: bool = True,
                    classifier_trained: bool = False) -> NetworkBundle:
    if bundle.arch.cascaded and not classifier_trained:
        bundle.reports["classifier"] = train_classifier(bundle.classifier, features, class_labels, cfg_classifier)
    train_detector(bundle, features, bits, cfg_detector, class_labels, use_predictions)
    return bundle


def infer_features(bundle: NetworkBundle, features, dtype=INFERENCE_DTYPE):
    """Detector soft outputs and class probabilities for a batch of feature rows.

    Inference runs on ``dtype`` copies of the weights; float32 halves the
    memory traffic of single-symbol calls.  Pass ``np.float64`` to use the
    trained parameters directly.
    """
    if not bundle.trained:
        raise StructureError(f"{bundle.arch.value} bundle has not been trained")
    detector, classifier = bundle.inference_networks(dtype)
    features = np.asarray(features, dtype=detector.dtype)
    class_vec = classify(classifier, features) if bundle.arch.cascaded else None
    x = assemble_input(bundle.arch, features, class_vec, bundle.routing)
    return detector.predict(x), class_vec


def infer(bundle: NetworkBundle, y, dtype=INFERENCE_DTYPE):
    """Decode received subcarriers ``y`` (one symbol or a stack) to data bits.

    Returns ``(bits, class_probs)``; ``class_probs`` is None for the
    non-cascaded detectors.
    """
    feats = featurize(y)
    single = feats.ndim == 1
    soft, class_vec = infer_features(bundle, feats[None] if single else feats, dtype)
    bits = (soft > 0.5).astype(np.uint8)
    if single:
        return bits[0], None if class_vec is None else class_vec[0]
    return bits, class_vec


def confusion_matrix(true_labels, pred_probs, n_classes: int = N_CHAN) -> np.ndarray:
    """Row-normalised confusion matrix; rows are true classes.

    Rows for classes absent from ``true_labels`` are left at zero.
    """
    t = np.asarray(true_labels)
    if t.ndim == 2:
        t = np.argmax(t, axis=1)
    p = np.argmax(np.asarray(pred_probs), axis=1)
    counts = np.zeros((n_classes, n_classes))
    np.add.at(counts, (t, p), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)


def classifier_confusion(bundle: NetworkBundle, features, class_labels) -> np.ndarray:
    if bundle.classifier is None:
        raise StructureError(f"{bundle.arch.value} has no channel classifier")
    return confusion_matrix(class_labels, classify(bundle.classifier, features))


# -- persistence -------------------------------------------------------------

MANIFEST = "manifest.txt"


def save_bundle(bundle: NetworkBundle, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    checkpoint.save(bundle.detector, d / "detector.unn")
    if bundle.classifier is not None:
        checkpoint.save(bundle.classifier, d / "classifier.unn")
    lines = [
        f"arch = {bundle.arch.value}",
        f"n_pilots = {bundle.n_pilots}",
        f"class_order = {','.join(c.name for c in ChannelClass)}",
        f"routing = {bundle.routing}",
        f"trained = {int(bundle.trained)}",
    ]
    if bundle.train_channel:
        lines.append(f"train_channel = {bundle.train_channel}")
    (d / MANIFEST).write_text("\n".join(lines) + "\n")
    return d


def load_bundle(directory) -> NetworkBundle:
    d = Path(directory)
    if not (d / MANIFEST).exists():
        raise FileNotFoundError(f"no bundle manifest at {d / MANIFEST}")
    meta = {}
    for line in (d / MANIFEST).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    order = meta.get("class_order", "")
    if order and order != ",".join(c.name for c in ChannelClass):
        raise StructureError(f"bundle class order {order} does not match this build")
    arch = Arch.parse(meta["arch"])
    classifier = checkpoint.load(d / "classifier.unn") if arch.cascaded else None
    return NetworkBundle(arch, int(meta["n_pilots"]), checkpoint.load(d / "detector.unn"), classifier,
                         meta.get("routing", "hard"), meta.get("train_channel"),
                         bool(int(meta.get("trained", "1"))))
