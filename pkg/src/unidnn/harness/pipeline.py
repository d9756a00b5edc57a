"""Training orchestration and the on-disk bundle registry."""

from __future__ import annotations

import logging
import time
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from ..channels import ChannelClass
from ..models import (Arch, NetworkBundle, build_bundle, build_classifier, load_bundle, save_bundle,
                      train_classifier, train_detector)
from ..phy import StructureError
from .config import ScenarioConfig
from .dataset import LabeledDataset, generate_dataset

log = logging.getLogger(__name__)


def single_name(cls) -> str:
    return f"Single-{ChannelClass.parse(cls).name}"


def bundle_dir(scn: ScenarioConfig) -> Path:
    return scn.work_path / f"np{scn.n_pilots}" / "bundles"


def data_dir(scn: ScenarioConfig) -> Path:
    return scn.work_path / f"np{scn.n_pilots}" / "data"


def dataset_path(scn: ScenarioConfig, name: str = "mixed") -> Path:
    return data_dir(scn) / f"{name}.unidnn"


def gen_datasets(scn: ScenarioConfig, write: bool = True) -> Dict[str, LabeledDataset]:
    """The mixed-class training set plus one single-class set per Single detector."""
    out = {"mixed": generate_dataset(scn, stream=0)}
    if Arch.Single.value in scn.archs:
        for c in single_classes(scn):
            out[c.name] = generate_dataset(scn, classes=[c], stream=1 + c.value)
    if write:
        data_dir(scn).mkdir(parents=True, exist_ok=True)
        for name, ds in out.items():
            ds.save(dataset_path(scn, name))
    return out


def single_classes(scn: ScenarioConfig):
    return [ChannelClass.parse(c) for c in (scn.single_classes or scn.classes)]


def _load_or_generate(scn: ScenarioConfig, name: str, classes, stream: int) -> LabeledDataset:
    path = dataset_path(scn, name)
    if path.exists():
        ds = LabeledDataset.load(path)
        if ds.m == scn.m and ds.n_pilots == scn.n_pilots:
            return ds
        log.info("ignoring stale dataset %s", path)
    return generate_dataset(scn, classes=classes, stream=stream)


def train_all(scn: ScenarioConfig, save: bool = True) -> Dict[str, NetworkBundle]:
    """Train every bundle named by ``scn.archs`` and return them by name.

    Uni-DNN variants share a single classifier, trained once on the mixed
    set and frozen before any detector is fitted.
    """
    archs = [Arch.parse(a) for a in scn.archs]
    bundles: Dict[str, NetworkBundle] = {}
    mixed = None
    if any(a is not Arch.Single for a in archs):
        mixed = _load_or_generate(scn, "mixed", scn.classes, 0)

    classifier = None
    if any(a.cascaded for a in archs):
        t0 = time.perf_counter()
        classifier = build_classifier(scn.n_hid, scn.dropout, np.random.default_rng([scn.seed, 7]))
        rep = train_classifier(classifier, mixed.features, mixed.class_labels, scn.train_config(7))
        log.info("classifier: val acc %.4f (%.1fs)", rep.val_accuracy[rep.best_epoch] if rep.best_epoch >= 0 else float("nan"),
                 time.perf_counter() - t0)

    for i, arch in enumerate(archs):
        if arch is Arch.Single:
            for c in single_classes(scn):
                ds = _load_or_generate(scn, c.name, [c], 1 + c.value)
                b = build_bundle(arch, scn.n_pilots, scn.n_hid, scn.dropout, scn.kernel, scn.routing,
                                 seed=scn.seed * 1000 + 10 + c.value, train_channel=c)
                _fit(b, ds, scn, 10 + c.value)
                bundles[single_name(c)] = b
            continue
        b = build_bundle(arch, scn.n_pilots, scn.n_hid, scn.dropout, scn.kernel, scn.routing,
                         classifier=classifier, seed=scn.seed * 1000 + i)
        _fit(b, mixed, scn, 20 + i)
        bundles[arch.value] = b

    if save:
        for name, b in bundles.items():
            save_bundle(b, bundle_dir(scn) / name)
    return bundles


def _fit(bundle: NetworkBundle, ds: LabeledDataset, scn: ScenarioConfig, offset: int):
    t0 = time.perf_counter()
    rep = train_detector(bundle, ds.features, ds.labels, scn.train_config(offset), ds.class_labels,
                         use_predictions=scn.train_on_predictions)
    log.info("%s%s: best val loss %.4f at epoch %d (%.1fs)", bundle.arch.value,
             f"[{bundle.train_channel}]" if bundle.train_channel else "", rep.best_val_loss,
             rep.best_epoch, time.perf_counter() - t0)


def load_bundles(scn: ScenarioConfig, names=None) -> Dict[str, NetworkBundle]:
    root = bundle_dir(scn)
    if names is None:
        names = [p.name for p in sorted(root.glob("*")) if (p / "manifest.txt").exists()]
    out = {}
    for name in names:
        path = root / name
        if not (path / "manifest.txt").exists():
            raise StructureError(f"missing trained bundle '{name}' (expected {path}); run `train` first")
        out[name] = load_bundle(path)
    return out


def find_classifier(bundles: Dict[str, NetworkBundle]) -> Optional[NetworkBundle]:
    for b in bundles.values():
        if b.classifier is not None:
            return b
    return None
