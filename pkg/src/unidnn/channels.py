"""Fading channel classes, CIR -> CFR conversion and AWGN.

Five channel classes are supported, in a fixed one-hot order::

    0 Rayleigh   4 taps, integer delays 0..3 T_s, uniform power
    1 Rician     6 taps, integer delays 0..5 T_s, kappa = 2, LOS on tap 0
    2 TdlA       23 fractional taps, 3GPP TDL-A profile spanning 0.965 us
    3 Winner2    24 fractional taps, exponential PDP spanning 5.2 us
    4 AwgnOnly   identity channel

Each OFDM symbol gets an independent draw (block fading per symbol).  All
classes have unit average power, so the per-subcarrier noise variance is
``10 ** (-snr_db / 10)`` regardless of class.

Winner2 is a surrogate: a 24-tap exponential power-delay profile on a
fixed pseudo-random delay grid, matched to the tap count and delay span of
the WINNER II setting rather than the full WINNER II geometry generator.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .phy import OfdmConfig, StructureError

N_CHAN = 5


class ChannelClass(enum.IntEnum):
    Rayleigh = 0
    Rician = 1
    TdlA = 2
    Winner2 = 3
    AwgnOnly = 4

    @classmethod
    def parse(cls, name) -> "ChannelClass":
        if isinstance(name, cls):
            return name
        if isinstance(name, (int, np.integer)):
            return cls(int(name))
        lookup = {c.name.lower(): c for c in cls}
        lookup.update({"tdl-a": cls.TdlA, "tdl_a": cls.TdlA, "winner": cls.Winner2,
                       "winnerii": cls.Winner2, "awgn": cls.AwgnOnly})
        try:
            return lookup[str(name).lower()]
        except KeyError:
            raise ValueError(f"unknown channel class {name!r}") from None

    @property
    def selective(self) -> bool:
        return self in (ChannelClass.Rayleigh, ChannelClass.Rician, ChannelClass.Winner2)


# 3GPP TR 38.901 Table 7.7.2-1 (TDL-A): normalized delay, power in dB.
TDL_A_PROFILE = np.array([
    [0.0000, -13.4], [0.3819, 0.0], [0.4025, -2.2], [0.5868, -4.0],
    [0.4610, -6.0], [0.5375, -8.2], [0.6708, -9.9], [0.5750, -10.5],
    [0.7618, -7.5], [1.5375, -15.9], [1.8978, -6.6], [2.2242, -16.7],
    [2.1718, -12.4], [2.4942, -15.2], [2.5119, -10.8], [3.0582, -11.3],
    [4.0810, -12.7], [4.4579, -16.2], [4.5695, -18.3], [4.7966, -18.9],
    [5.0066, -16.6], [5.3043, -19.9], [9.6586, -29.7],
])

WINNER2_GRID_SEED = 0x5EED_2


@dataclass(frozen=True)
class ChannelModelParams:
    """Tap structure of one channel class.

    ``delay_span`` is the total extent of tap delays (seconds); the
    fractional-delay classes place their last tap exactly at it.
    """

    cls: ChannelClass
    delays: np.ndarray  # seconds
    powers: np.ndarray  # linear, sums to 1
    delay_span: float
    kappa: float = 0.0

    @property
    def n_taps(self) -> int:
        return self.delays.size


def default_params(cls, cfg: Optional[OfdmConfig] = None) -> ChannelModelParams:
    cls = ChannelClass.parse(cls)
    cfg = cfg or OfdmConfig()
    ts = cfg.sample_period
    if cls is ChannelClass.Rayleigh:
        n = 4
        return ChannelModelParams(cls, np.arange(n) * ts, np.full(n, 1.0 / n), n * ts)
    if cls is ChannelClass.Rician:
        n = 6
        return ChannelModelParams(cls, np.arange(n) * ts, np.full(n, 1.0 / n), n * ts, kappa=2.0)
    if cls is ChannelClass.TdlA:
        span = 0.965e-6
        norm_delay, power_db = TDL_A_PROFILE.T
        powers = 10.0 ** (power_db / 10.0)
        return ChannelModelParams(
            cls, norm_delay / norm_delay.max() * span, powers / powers.sum(), span
        )
    if cls is ChannelClass.Winner2:
        span = 5.2e-6
        n = 24
        grid_rng = np.random.Generator(np.random.PCG64(WINNER2_GRID_SEED))
        delays = np.concatenate([[0.0], np.sort(grid_rng.uniform(0.0, 1.0, n - 2)), [1.0]]) * span
        powers = np.exp(-delays / (span / 3.0))
        return ChannelModelParams(cls, delays, powers / powers.sum(), span)
    return ChannelModelParams(cls, np.zeros(1), np.ones(1), 0.0)


@dataclass
class ChannelRealization:
    cls: ChannelClass
    delays: np.ndarray  # (L,) seconds
    gains: np.ndarray  # (..., L) complex
    cfr: np.ndarray  # (..., n_sub) complex

    @property
    def taps(self) -> Sequence[Tuple[float, complex]]:
        return list(zip(self.delays.tolist(), np.atleast_1d(self.gains).tolist()))


def cir_to_cfr(delays, gains, cfg: OfdmConfig) -> np.ndarray:
    """H_k = sum_l g_l exp(-j 2 pi k tau_l / (N_FFT T_s)), k = 0..n_sub-1.

    ``gains`` may carry leading batch axes; ``delays`` is shared.
    """
    delays = np.asarray(delays, dtype=np.float64)
    gains = np.asarray(gains, dtype=np.complex128)
    if delays.size == 0:
        raise StructureError("channel needs at least one tap")
    if np.any(delays < 0):
        raise StructureError("tap delays must be non-negative")
    k = np.arange(cfg.n_sub)
    steering = np.exp(-2j * np.pi * np.outer(delays, k) / (cfg.n_fft * cfg.sample_period))
    return gains @ steering


def _rayleigh_gains(rng, powers, size) -> np.ndarray:
    shape = (() if size is None else (size,)) + (powers.size,)
    g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return g * np.sqrt(powers / 2.0)


def draw_rayleigh(params: ChannelModelParams, rng, cfg: OfdmConfig, size=None):
    g = _rayleigh_gains(rng, params.powers, size)
    return ChannelRealization(params.cls, params.delays, g, cir_to_cfr(params.delays, g, cfg))


def draw_rician(params: ChannelModelParams, rng, cfg: OfdmConfig, size=None):
    k = params.kappa
    g = _rayleigh_gains(rng, params.powers / (1.0 + k), size)
    phase = rng.uniform(-np.pi / 2, np.pi / 2, size=None if size is None else (size,))
    g[..., 0] += np.sqrt(k / (1.0 + k)) * np.exp(1j * phase)
    return ChannelRealization(params.cls, params.delays, g, cir_to_cfr(params.delays, g, cfg))


# TDL-A and the Winner2 surrogate are both Rayleigh taps on a fixed delay/power grid.
draw_tdl_a = draw_rayleigh
draw_winner2 = draw_rayleigh


def awgn_class(cfg: Optional[OfdmConfig] = None, size=None) -> ChannelRealization:
    cfg = cfg or OfdmConfig()
    shape = (() if size is None else (size,))
    g = np.ones(shape + (1,), dtype=np.complex128)
    return ChannelRealization(ChannelClass.AwgnOnly, np.zeros(1), g, np.ones(shape + (cfg.n_sub,), np.complex128))


def draw_channel(cls, rng, cfg: OfdmConfig, size=None) -> ChannelRealization:
    """Draw ``size`` independent realizations (or one when ``size`` is None)."""
    cls = ChannelClass.parse(cls)
    if cls is ChannelClass.AwgnOnly:
        return awgn_class(cfg, size)
    params = default_params(cls, cfg)
    if cls is ChannelClass.Rician:
        return draw_rician(params, rng, cfg, size)
    return draw_rayleigh(params, rng, cfg, size)


def noise_variance(snr_db) -> np.ndarray:
    """Per-subcarrier complex noise variance at unit signal power."""
    return 10.0 ** (-np.asarray(snr_db, dtype=np.float64) / 10.0)


def apply_channel(grid, chan: ChannelRealization, snr_db, rng, cfg: Optional[OfdmConfig] = None):
    """Y = X * H + n with complex Gaussian noise of variance 10^(-snr/10).

    ``snr_db`` may be a scalar or one value per leading-axis symbol; pass
    ``None`` for a noiseless link.
    """
    cfg = cfg or OfdmConfig()
    if np.max(chan.delays) > cfg.cp_duration * (1 + 1e-9):
        raise StructureError(
            f"channel delay span {np.max(chan.delays):.3e}s exceeds the cyclic prefix "
            f"({cfg.cp_duration:.3e}s)"
        )
    y = np.asarray(grid) * chan.cfr
    if snr_db is None:
        return y
    sigma2 = noise_variance(snr_db)
    if sigma2.ndim:
        sigma2 = sigma2[..., None]
    noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    return y + noise * np.sqrt(sigma2 / 2.0)


def estimate_correlation(cls, cfg: OfdmConfig, snr_db: float, rng, m_h: int = 1000):
    """Monte-Carlo auto-correlations of the true and LS pilot channels.

    Returns ``(R_HH, R_lsls)``, both ``N_p x N_p``: the sample mean of
    ``H H^H`` over ``m_h`` true CFRs restricted to pilot subcarriers, and of
    the noisy LS pilot estimates at ``snr_db``.
    """
    if m_h < 2:
        raise ValueError("need at least two channel samples")
    layout = cfg.layout
    chan = draw_channel(cls, rng, cfg, size=m_h)
    h = chan.cfr[:, layout.pilot_indices]
    grid = np.broadcast_to(layout.pilot_symbols, h.shape)
    sigma2 = noise_variance(snr_db)
    noise = (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)) * np.sqrt(sigma2 / 2)
    h_ls = (grid * h + noise) / grid
    r_hh = h.T @ h.conj() / m_h
    r_ls = h_ls.T @ h_ls.conj() / m_h
    # symmetrize away round-off so the matrices are exactly Hermitian
    return (r_hh + r_hh.conj().T) / 2, (r_ls + r_ls.conj().T) / 2
