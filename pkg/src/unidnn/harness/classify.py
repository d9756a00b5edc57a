from __future__ import annotations

import csv
from typing import Dict, Sequence

import numpy as np

from ..channels import ChannelClass
from ..models import NetworkBundle, classifier_confusion, featurize
from ..phy import OfdmConfig
from ..rng import substream
from .config import ScenarioConfig
from .dataset import simulate_symbols

CLASS_NAMES = [c.name for c in ChannelClass]


def run_classifier_eval(scn: ScenarioConfig, bundle: NetworkBundle, snr_list=None,
                        n_samples=None) -> Dict[float, np.ndarray]:
    """Row-normalised 5x5 confusion matrix of the channel classifier at each SNR."""
    cfg = OfdmConfig.with_pilots(scn.n_pilots)
    snr_list = list(snr_list if snr_list is not None else scn.snr_list)
    n = n_samples or scn.classify_samples
    out = {}
    for i, snr in enumerate(snr_list):
        rng = substream(scn.seed, 4, i)
        batch = simulate_symbols(cfg, scn.class_list, snr, rng, n=n)
        out[float(snr)] = classifier_confusion(bundle, featurize(batch.y), batch.classes)
    return out


def write_confusion_csv(matrices: Dict[float, np.ndarray], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snr_db", "true_class"] + [f"pred_{c}" for c in CLASS_NAMES])
        for snr, mat in matrices.items():
            for i, row in enumerate(mat):
                w.writerow([f"{snr:g}", CLASS_NAMES[i]] + [f"{v:.6f}" for v in row])


def write_accuracy_csv(matrices: Dict[float, np.ndarray], path, classes: Sequence[str] = CLASS_NAMES) -> None:
    present = [ChannelClass.parse(c).value for c in classes]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snr_db", "class", "accuracy"])
        for snr, mat in matrices.items():
            for i in present:
                w.writerow([f"{snr:g}", CLASS_NAMES[i], f"{mat[i, i]:.6f}"])
            w.writerow([f"{snr:g}", "overall", f"{np.mean([mat[i, i] for i in present]):.6f}"])
