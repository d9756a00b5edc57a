"""Simulated training/test data and its binary file format.

Dataset file layout (little-endian)::

    b"UNIDNN1"                 7-byte magic
    u8   format version        1
    u64  m
    u32  N_in, N_out, N_chan, N_p
    u8   snr policy            0 = fixed, 1 = uniform
    f64  snr_lo, snr_hi        fixed policy stores the value twice
    f64  features  m x N_in
    f64  labels    m x N_out
    f64  classes   m x N_chan  (one-hot)
    f64  snr       m
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..channels import N_CHAN, ChannelClass, ChannelRealization, apply_channel, draw_channel
from ..models import featurize
from ..phy import OfdmConfig, build_grid, map_bits_to_qpsk, random_bits
from ..rng import substream
from .config import ScenarioConfig

MAGIC = b"UNIDNN1"
VERSION = 1
_HEADER = struct.Struct("<7sBQIIIIBdd")


class DatasetFormatError(ValueError):
    pass


@dataclass
class SymbolBatch:
    """A batch of transmitted OFDM symbols and what the receiver saw."""

    bits: np.ndarray  # (n, 2 * n_data) uint8
    y: np.ndarray  # (n, n_sub) received subcarriers
    cfr: np.ndarray  # (n, n_sub) true channel
    classes: np.ndarray  # (n,) class index
    snr_db: np.ndarray  # (n,)


def simulate_symbols(cfg: OfdmConfig, classes: Sequence[ChannelClass], snr_db, rng,
                     n: Optional[int] = None, bits=None) -> SymbolBatch:
    """Draw ``n`` independent symbols over a uniform mixture of ``classes``.

    ``snr_db`` is a scalar, one value per symbol, or None for a noiseless link.  ``bits`` may be given
    explicitly (e.g. image payload), otherwise fresh random bits are used.
    Draw order is fixed (class, bits, channels, noise) so results are
    reproducible from the generator state.
    """
    if bits is not None:
        bits = np.asarray(bits, dtype=np.uint8)
        n = len(bits)
    classes = [ChannelClass.parse(c) for c in classes]
    cls_idx = np.asarray([c.value for c in classes])[rng.integers(0, len(classes), size=n)]
    if bits is None:
        bits = random_bits(rng, (n, cfg.bits_per_symbol))
    grid = build_grid(map_bits_to_qpsk(bits), cfg.layout)
    cfr = np.empty((n, cfg.n_sub), dtype=np.complex128)
    for c in classes:
        sel = np.flatnonzero(cls_idx == c.value)
        if sel.size:
            cfr[sel] = draw_channel(c, rng, cfg, size=sel.size).cfr
    chan = ChannelRealization(ChannelClass.AwgnOnly, np.zeros(1), np.ones((n, 1)), cfr)
    if snr_db is None:
        snr = np.full(n, np.inf)
        y = apply_channel(grid, chan, None, rng, cfg)
    else:
        snr = np.broadcast_to(np.asarray(snr_db, dtype=np.float64), (n,))
        y = apply_channel(grid, chan, snr, rng, cfg)
    return SymbolBatch(bits, y, cfr, cls_idx, np.array(snr))


@dataclass
class LabeledDataset:
    features: np.ndarray  # m x 128
    labels: np.ndarray  # m x N_out
    class_labels: np.ndarray  # m x 5 one-hot
    snr: np.ndarray  # m
    n_pilots: int
    snr_policy: str = "uniform"
    snr_bounds: tuple = (0.0, 20.0)
    version: int = VERSION

    def __post_init__(self):
        m = len(self.features)
        if not (len(self.labels) == len(self.class_labels) == len(self.snr) == m):
            raise DatasetFormatError("dataset fields disagree on the number of rows")
        if not np.all(np.isfinite(self.features)):
            raise DatasetFormatError("dataset features must be finite")

    @property
    def m(self) -> int:
        return len(self.features)

    @property
    def class_index(self) -> np.ndarray:
        return np.argmax(self.class_labels, axis=1)

    def save(self, path) -> None:
        lo, hi = self.snr_bounds
        head = _HEADER.pack(MAGIC, self.version, self.m, self.features.shape[1], self.labels.shape[1],
                            self.class_labels.shape[1], self.n_pilots,
                            1 if self.snr_policy == "uniform" else 0, lo, hi)
        with open(path, "wb") as fh:
            fh.write(head)
            for block in (self.features, self.labels, self.class_labels, self.snr):
                fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "LabeledDataset":
        data = Path(path).read_bytes()
        if len(data) < _HEADER.size:
            raise DatasetFormatError(f"{path} is too short to be a dataset file")
        magic, version, m, n_in, n_out, n_chan, n_p, policy, lo, hi = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise DatasetFormatError(f"{path} is not a dataset file (bad magic)")
        if version != VERSION:
            raise DatasetFormatError(f"unsupported dataset version {version}")
        expected = _HEADER.size + 8 * m * (n_in + n_out + n_chan + 1)
        if len(data) != expected:
            raise DatasetFormatError(f"{path} has {len(data)} bytes, expected {expected}")
        offset = _HEADER.size
        blocks = []
        for width in (n_in, n_out, n_chan, 1):
            arr = np.frombuffer(data, dtype="<f8", count=m * width, offset=offset)
            blocks.append(arr.reshape(m, width).astype(np.float64) if width > 1 else arr.astype(np.float64))
            offset += 8 * m * width
        return cls(blocks[0], blocks[1], blocks[2], blocks[3], n_p,
                   "uniform" if policy else "fixed", (lo, hi), version)


def draw_snr(scn: ScenarioConfig, rng, n: int) -> np.ndarray:
    if scn.snr_policy == "fixed":
        return np.full(n, float(scn.snr_db))
    lo, hi = scn.snr_range
    return rng.uniform(lo, hi, size=n)


def generate_dataset(scn: ScenarioConfig, classes=None, m: Optional[int] = None,
                     stream: int = 0) -> LabeledDataset:
    """Simulate ``m`` labelled symbols; ``stream`` selects an independent RNG stream."""
    classes = [ChannelClass.parse(c) for c in (classes or scn.classes)]
    m = m or scn.m
    cfg = OfdmConfig.with_pilots(scn.n_pilots)
    rng = substream(scn.seed, 1, stream)
    snr = draw_snr(scn, rng, m)
    batch = simulate_symbols(cfg, classes, snr, rng, n=m)
    one_hot = np.zeros((m, N_CHAN))
    one_hot[np.arange(m), batch.classes] = 1.0
    if scn.snr_policy == "fixed":
        bounds = (float(scn.snr_db), float(scn.snr_db))
    else:
        bounds = tuple(float(v) for v in scn.snr_range)
    return LabeledDataset(featurize(batch.y), batch.bits.astype(np.float64), one_hot, batch.snr_db,
                          scn.n_pilots, scn.snr_policy, bounds)
