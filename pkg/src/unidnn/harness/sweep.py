"""Monte-Carlo BER-vs-SNR sweeps over conventional and neural receivers."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..channels import ChannelClass, estimate_correlation
from ..models import NetworkBundle, infer
from ..phy import OfdmConfig, StructureError
from ..receivers import EstimateMethod, estimate_channel, ml_detect
from ..rng import substream
from .config import CONVENTIONAL, NEURAL, ScenarioConfig
from .dataset import simulate_symbols

MIXED = "Mixed"
CSV_HEADER = ["method", "channel", "np", "snr_db", "ber", "bits"]


@dataclass
class BerPoint:
    method: str
    channel: str
    n_pilots: int
    snr_db: float
    errors: int
    bits: int
    min_errors: int = 10

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")

    @property
    def bound(self) -> bool:
        """True when the bit budget ran out before ``min_errors`` errors were seen."""
        return self.errors < self.min_errors


def channel_classes(channel: str, scn: ScenarioConfig) -> List[ChannelClass]:
    if channel == MIXED:
        return scn.class_list
    return [ChannelClass.parse(channel)]


def channel_key(channel: str) -> int:
    return 99 if channel == MIXED else ChannelClass.parse(channel).value


def mixture_correlation(classes, cfg: OfdmConfig, snr_db: float, rng, m_h: int):
    """Correlation matrices of a uniform class mixture (average of per-class estimates)."""
    pairs = [estimate_correlation(c, cfg, snr_db, rng, m_h) for c in classes]
    return sum(p[0] for p in pairs) / len(pairs), sum(p[1] for p in pairs) / len(pairs)


def neural_bundle_name(method: str, channel: str) -> Optional[str]:
    if method == "Single":
        return None if channel == MIXED else f"Single-{ChannelClass.parse(channel).name}"
    return method


def resolve_methods(methods: Sequence[str], channel: str, bundles: Dict[str, NetworkBundle]):
    """Map method tags to decoders for one channel, checking neural bundles exist."""
    out = []
    for m in methods:
        if m in CONVENTIONAL:
            out.append((m, None))
        elif m in NEURAL:
            name = neural_bundle_name(m, channel)
            if name is None:
                continue  # a single-channel detector has no mixed-channel counterpart
            if name not in bundles:
                raise StructureError(f"missing trained bundle '{name}' needed for method {m}; run `train` first")
            out.append((m, bundles[name]))
        else:
            raise StructureError(f"unknown method {m!r}")
    return out


def decode(method: str, bundle, batch, layout, snr_db, corr) -> np.ndarray:
    if bundle is not None:
        bits, _ = infer(bundle, batch.y)
        return bits
    R = None
    if method == "MMSE_perfect":
        R = corr[0]
    elif method == "MMSE_nonperfect":
        R = corr[1]
    est = estimate_channel(batch.y, layout, EstimateMethod(method), snr_db=snr_db, R=R,
                           true_cfr=batch.cfr)
    return ml_detect(batch.y, est, layout).bits


def run_point(scn: ScenarioConfig, channel: str, snr_index: int, snr_db: float,
              methods: Sequence[str], bundles: Dict[str, NetworkBundle]) -> List[BerPoint]:
    """All methods at one (channel, SNR) point, sharing the same simulated symbols."""
    cfg = OfdmConfig.with_pilots(scn.n_pilots)
    classes = channel_classes(channel, scn)
    decoders = resolve_methods(methods, channel, bundles)
    rng = substream(scn.seed, 2, channel_key(channel), snr_index)
    corr = None
    if any(m.startswith("MMSE") for m, _ in decoders):
        corr = mixture_correlation(classes, cfg, snr_db, substream(scn.seed, 3, channel_key(channel), snr_index), scn.m_h)
    points = {m: BerPoint(m, channel, scn.n_pilots, float(snr_db), 0, 0, scn.min_errors) for m, _ in decoders}
    active = list(decoders)
    bps = cfg.bits_per_symbol
    while active:
        remaining = max(scn.bit_budget - points[m].bits for m, _ in active)
        n = max(1, min(scn.batch_symbols, math.ceil(remaining / bps)))
        batch = simulate_symbols(cfg, classes, snr_db, rng, n=n)
        still = []
        for m, bundle in active:
            rx = decode(m, bundle, batch, cfg.layout, snr_db, corr)
            p = points[m]
            p.errors += int(np.count_nonzero(rx != batch.bits))
            p.bits += batch.bits.size
            done = (p.errors >= scn.min_errors and p.bits >= scn.min_bits) or p.bits >= scn.bit_budget
            if not done:
                still.append((m, bundle))
        active = still
    return [points[m] for m, _ in decoders]


def run_ber_sweep(scn: ScenarioConfig, bundles: Optional[Dict[str, NetworkBundle]] = None,
                  methods=None, channels=None, snr_list=None) -> List[BerPoint]:
    """BER for every method x channel x SNR; results are ordered deterministically."""
    bundles = bundles or {}
    methods = list(methods or scn.methods)
    channels = list(channels or scn.sweep_channels)
    snr_list = list(snr_list if snr_list is not None else scn.snr_list)
    for ch in channels:
        resolve_methods(methods, ch, bundles)  # fail fast on missing checkpoints
    jobs = [(ch, i, s) for ch in channels for i, s in enumerate(snr_list)]
    if scn.workers > 1:
        with ProcessPoolExecutor(scn.workers) as pool:
            futures = [pool.submit(run_point, scn, ch, i, s, methods, bundles) for ch, i, s in jobs]
            results = [f.result() for f in futures]
    else:
        results = [run_point(scn, ch, i, s, methods, bundles) for ch, i, s in jobs]
    return [p for group in results for p in group]


def write_ber_csv(points: Sequence[BerPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in points:
            w.writerow([p.method, p.channel, p.n_pilots, f"{p.snr_db:g}", f"{p.ber:.6e}", p.bits])


def read_ber_csv(path) -> List[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["np"] = int(r["np"])
        r["snr_db"] = float(r["snr_db"])
        r["ber"] = float(r["ber"])
        r["bits"] = int(r["bits"])
    return rows
