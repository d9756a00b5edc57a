"""Scenario configuration, loadable from a YAML key/value file.

Keys in the file are exactly the :class:`ScenarioConfig` field names.  A
``profile`` key (``full`` or ``fast``) selects a preset that the remaining
keys then override.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import yaml

from ..channels import ChannelClass
from ..models import Arch
from ..nn.training import TrainConfig

ALL_CLASSES = [c.name for c in ChannelClass]
CONVENTIONAL = ["True", "LS", "MMSE_perfect", "MMSE_nonperfect"]
NEURAL = [a.value for a in Arch]

PROFILES = {
    "full": {},
    "fast": {"m": 20000, "epochs": 150, "n_hid": 256},
}


@dataclass
class ScenarioConfig:
    profile: str = "full"
    classes: List[str] = field(default_factory=lambda: list(ALL_CLASSES))
    snr_policy: str = "uniform"  # "uniform" over snr_range, or "fixed" at snr_db
    snr_db: float = 20.0
    snr_range: Tuple[float, float] = (0.0, 20.0)
    n_pilots: int = 8
    m: int = 100000
    seed: int = 0
    # networks and training
    n_hid: int = 512
    epochs: int = 700
    batch_size: int = 3000
    learning_rate: float = 1e-3
    l2: float = 2e-6
    dropout: float = 0.01
    train_fraction: float = 0.7
    archs: List[str] = field(default_factory=lambda: list(NEURAL))
    single_classes: Optional[List[str]] = None  # classes that get a Single detector; None = classes
    routing: str = "hard"
    kernel: int = 1
    train_on_predictions: bool = True
    # evaluation
    methods: List[str] = field(default_factory=lambda: CONVENTIONAL + NEURAL)
    sweep_channels: List[str] = field(default_factory=lambda: list(ALL_CLASSES) + ["Mixed"])
    snr_list: List[float] = field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0])
    min_errors: int = 10
    min_bits: int = 0
    bit_budget: int = 10_000_000
    batch_symbols: int = 2000
    m_h: int = 1000
    workers: int = 1
    classify_samples: int = 2000
    timing_trials: int = 2000
    image: Optional[str] = None
    image_channel: str = "TdlA"
    image_snr: float = 20.0
    work_dir: str = "runs/default"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.m <= 0:
            raise ValueError("m must be positive")
        if self.snr_policy not in ("uniform", "fixed"):
            raise ValueError(f"unknown snr_policy {self.snr_policy!r}")
        lo, hi = self.snr_range
        if not (0.0 <= lo <= hi <= 20.0):
            raise ValueError(f"snr_range {self.snr_range} must lie within [0, 20] dB")
        if self.snr_policy == "fixed" and not 0.0 <= self.snr_db <= 20.0:
            raise ValueError(f"snr_db {self.snr_db} must lie within [0, 20] dB")
        for c in self.classes:
            ChannelClass.parse(c)
        for a in self.archs:
            Arch.parse(a)
        if 64 % self.n_pilots:
            raise ValueError(f"{self.n_pilots} pilots cannot comb 64 subcarriers")
        if self.routing not in ("hard", "soft"):
            raise ValueError(f"unknown routing {self.routing!r}")

    @property
    def class_list(self) -> List[ChannelClass]:
        return [ChannelClass.parse(c) for c in self.classes]

    def train_config(self, seed_offset: int = 0) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, l2=self.l2, batch_size=self.batch_size,
                           epochs=self.epochs, train_fraction=self.train_fraction,
                           seed=self.seed + seed_offset)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @property
    def work_path(self) -> Path:
        return Path(self.work_dir)


def make_config(profile: str = "full", **overrides) -> ScenarioConfig:
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    values = dict(PROFILES[profile])
    values.update(overrides)
    values["profile"] = profile
    if "snr_range" in values:
        values["snr_range"] = tuple(values["snr_range"])
    return ScenarioConfig(**values)


def load_config(path=None, **overrides) -> ScenarioConfig:
    data = {}
    if path is not None:
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict):
            raise ValueError(f"config {path} must be a key/value mapping")
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return make_config(**data)


def dump_config(cfg: ScenarioConfig) -> str:
    d = dataclasses.asdict(cfg)
    d["snr_range"] = list(d["snr_range"])
    return yaml.safe_dump(d, sort_keys=False)
