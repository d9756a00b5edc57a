"""Per-symbol inference run-time, relative to LS pilot estimation."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from ..channels import ChannelClass, noise_variance
from ..models import NetworkBundle, infer
from ..phy import OfdmConfig
from ..receivers import interpolate_estimate, ls_estimate, mmse_estimate
from ..rng import substream
from .config import ScenarioConfig
from .dataset import simulate_symbols
from .sweep import mixture_correlation


@dataclass
class TimingReport:
    seconds: Dict[str, float] = field(default_factory=dict)  # median per-symbol wall clock

    @property
    def t_ls(self) -> float:
        return self.seconds["LS"]

    def ratios(self) -> Dict[str, float]:
        return {k: v / self.t_ls for k, v in self.seconds.items()}


def median_call_time(fn: Callable[[int], object], n_trials: int, n_inputs: int, warmup: int = 20) -> float:
    """Median wall-clock of single calls ``fn(i)`` cycling over ``n_inputs`` inputs."""
    for i in range(warmup):
        fn(i % n_inputs)
    times = np.empty(n_trials)
    clock = time.perf_counter
    for i in range(n_trials):
        t0 = clock()
        fn(i % n_inputs)
        times[i] = clock() - t0
    return float(np.median(times))


def run_timing(scn: ScenarioConfig, bundles: Optional[Dict[str, NetworkBundle]] = None,
               methods=None, n_trials: Optional[int] = None, snr_db: float = 10.0) -> TimingReport:
    """Time one-symbol inference for each method.

    LS covers the pilot division only (no interpolation).  MMSE covers LS,
    the regularized solve and interpolation; its correlation matrices are
    estimated once up front and not timed.  Neural methods time the full
    ``infer`` call, classifier included.
    """
    bundles = bundles or {}
    n_trials = n_trials or scn.timing_trials
    cfg = OfdmConfig.with_pilots(scn.n_pilots)
    layout = cfg.layout
    rng = substream(scn.seed, 5)
    batch = simulate_symbols(cfg, scn.class_list, snr_db, rng, n=64)
    ys = [batch.y[i].copy() for i in range(len(batch.y))]
    pilots, symbols = layout.pilot_indices, layout.pilot_symbols
    r_hh, _ = mixture_correlation(scn.class_list, cfg, snr_db, rng, scn.m_h)
    sigma2 = float(noise_variance(snr_db))

    fns = {
        "LS": lambda i: ls_estimate(ys[i][pilots], symbols),
        "MMSE": lambda i: interpolate_estimate(
            mmse_estimate(ls_estimate(ys[i][pilots], symbols), r_hh, sigma2=sigma2), layout),
    }
    for name, bundle in bundles.items():
        fns[name] = (lambda b: (lambda i: infer(b, ys[i])))(bundle)
    wanted = list(methods) if methods else list(fns)
    if "LS" not in wanted:
        wanted.insert(0, "LS")
    report = TimingReport()
    for name in wanted:
        report.seconds[name] = median_call_time(fns[name], n_trials, len(ys))
    return report


def write_timing_csv(report: TimingReport, path) -> None:
    ratios = report.ratios()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "seconds_per_symbol", "relative_to_ls"])
        for k, v in report.seconds.items():
            w.writerow([k, f"{v:.6e}", f"{ratios[k]:.2f}"])
