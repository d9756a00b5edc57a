"""OFDM baseband: QPSK mapping, comb-pilot grids, IFFT/CP and CP/FFT.

Every function operates on the last axis so a stack of OFDM symbols
(shape ``(..., n_sub)``) can be processed in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SQRT_HALF = 1.0 / np.sqrt(2.0)


class StructureError(ValueError):
    """Input has the wrong length/shape for the requested operation."""


@dataclass(frozen=True)
class OfdmConfig:
    """Static OFDM numerology (64 subcarriers, 15 kHz spacing, 16-sample CP)."""

    n_sub: int = 64
    n_fft: int = 64
    n_ifft: int = 64
    n_cp: int = 16
    delta_f: float = 15e3
    pilot_spacing: int = 8
    pilot_seed: int = 2024

    def __post_init__(self):
        if not (self.n_sub == self.n_fft == self.n_ifft):
            raise StructureError("n_sub, n_fft and n_ifft must agree (fully loaded grid)")
        if self.pilot_spacing < 1 or self.n_sub % self.pilot_spacing:
            raise StructureError(
                f"pilot spacing {self.pilot_spacing} does not divide {self.n_sub} subcarriers"
            )

    @classmethod
    def with_pilots(cls, n_pilots: int, **kwargs) -> "OfdmConfig":
        n_sub = kwargs.get("n_sub", 64)
        if n_pilots < 1 or n_sub % n_pilots:
            raise StructureError(f"{n_pilots} pilots cannot comb {n_sub} subcarriers")
        return cls(pilot_spacing=n_sub // n_pilots, **kwargs)

    @property
    def n_pilots(self) -> int:
        return self.n_sub // self.pilot_spacing

    @property
    def n_data(self) -> int:
        return self.n_sub - self.n_pilots

    @property
    def bits_per_symbol(self) -> int:
        return 2 * self.n_data

    @property
    def sample_period(self) -> float:
        # T_s = 1 / f_s with f_s = N_FFT * delta_f (0.96 MHz)
        return 1.0 / (self.n_fft * self.delta_f)

    @property
    def cp_duration(self) -> float:
        return self.n_cp * self.sample_period

    @cached_property
    def layout(self) -> "PilotLayout":
        return PilotLayout.comb(self.n_sub, self.pilot_spacing, self.pilot_seed)


@dataclass(frozen=True)
class PilotLayout:
    pilot_indices: np.ndarray
    pilot_symbols: np.ndarray
    data_indices: np.ndarray
    n_sub: int = field(default=64)

    @classmethod
    def comb(cls, n_sub: int, spacing: int, seed: int) -> "PilotLayout":
        """Pilots on every ``spacing``-th subcarrier starting at 0.

        Pilot values are pseudo-random QPSK points drawn from ``seed`` so
        that every layout with the same seed is reproducible.
        """
        if spacing < 1 or n_sub % spacing:
            raise StructureError(f"pilot spacing {spacing} does not divide {n_sub}")
        pilots = np.arange(0, n_sub, spacing)
        data = np.setdiff1d(np.arange(n_sub), pilots)
        rng = np.random.Generator(np.random.PCG64(seed))
        symbols = map_bits_to_qpsk(rng.integers(0, 2, size=2 * pilots.size))
        for arr in (pilots, data, symbols):
            arr.flags.writeable = False
        return cls(pilots, symbols, data, n_sub)

    @property
    def n_pilots(self) -> int:
        return self.pilot_indices.size


def map_bits_to_qpsk(bits) -> np.ndarray:
    """Gray QPSK: bit pair (b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)."""
    bits = np.asarray(bits)
    if bits.shape[-1] % 2:
        raise StructureError(f"QPSK needs an even number of bits, got {bits.shape[-1]}")
    b = bits.reshape(bits.shape[:-1] + (-1, 2)).astype(np.float64)
    return ((1.0 - 2.0 * b[..., 0]) + 1j * (1.0 - 2.0 * b[..., 1])) * SQRT_HALF


def demap_qpsk_hard(symbols) -> np.ndarray:
    """Quadrant decision, inverse of :func:`map_bits_to_qpsk`."""
    symbols = np.asarray(symbols)
    out = np.empty(symbols.shape + (2,), dtype=np.uint8)
    out[..., 0] = symbols.real < 0
    out[..., 1] = symbols.imag < 0
    return out.reshape(symbols.shape[:-1] + (-1,)) if symbols.ndim else out


def build_grid(data_symbols, layout: PilotLayout) -> np.ndarray:
    data_symbols = np.asarray(data_symbols)
    if data_symbols.shape[-1] != layout.data_indices.size:
        raise StructureError(
            f"{data_symbols.shape[-1]} data symbols for {layout.data_indices.size} data slots"
        )
    grid = np.empty(data_symbols.shape[:-1] + (layout.n_sub,), dtype=np.complex128)
    grid[..., layout.pilot_indices] = layout.pilot_symbols
    grid[..., layout.data_indices] = data_symbols
    return grid


def ofdm_modulate(grid, cfg: OfdmConfig) -> np.ndarray:
    """Unitary IDFT of the grid with the last ``n_cp`` samples prepended."""
    grid = np.asarray(grid)
    if grid.shape[-1] != cfg.n_ifft:
        raise StructureError(f"grid length {grid.shape[-1]} != n_ifft {cfg.n_ifft}")
    body = np.fft.ifft(grid, axis=-1, norm="ortho")
    return np.concatenate([body[..., -cfg.n_cp:], body], axis=-1)


def ofdm_demodulate(rx, cfg: OfdmConfig) -> np.ndarray:
    rx = np.asarray(rx)
    if rx.shape[-1] < cfg.n_cp + cfg.n_fft:
        raise StructureError(
            f"received block of {rx.shape[-1]} samples is shorter than CP + FFT "
            f"({cfg.n_cp + cfg.n_fft})"
        )
    return np.fft.fft(rx[..., cfg.n_cp:cfg.n_cp + cfg.n_fft], axis=-1, norm="ortho")


def random_bits(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.integers(0, 2, size=shape, dtype=np.uint8)
