"""Conventional receivers: LS / MMSE pilot estimation, interpolation, ML detection."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.linalg.lapack import zpocon

from .channels import noise_variance
from .phy import SQRT_HALF, PilotLayout, StructureError, demap_qpsk_hard

ZERO_GUARD = 1e-12
RCOND_LIMIT = 1e-12


class EstimateMethod(str, enum.Enum):
    LS = "LS"
    MMSE_perfect = "MMSE_perfect"
    MMSE_nonperfect = "MMSE_nonperfect"
    TRUE = "True"


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass
class ChannelEstimate:
    h_hat: np.ndarray
    method: EstimateMethod


@dataclass
class EqualizedSymbol:
    x_hat: np.ndarray  # hard-decided QPSK points on data subcarriers
    bits: np.ndarray
    guarded: np.ndarray  # True where the estimate was clamped away from zero


def ls_estimate(y_pilots, pilot_symbols) -> np.ndarray:
    pilot_symbols = np.asarray(pilot_symbols)
    if np.any(pilot_symbols == 0):
        raise StructureError("LS estimation needs non-zero pilot symbols")
    return np.asarray(y_pilots) / pilot_symbols


def mmse_estimate(h_ls, R, snr_db=None, *, sigma2=None) -> np.ndarray:
    """Correlation-weighted smoothing ``R (R + sigma2 I)^-1 h_ls``.

    ``R`` is R_HH for the perfect-CSI variant or the LS-estimate correlation
    for the non-perfect variant; the arithmetic is identical.  The noise
    term is the reciprocal SNR (unit-power pilots), given either as
    ``snr_db`` or directly as ``sigma2``.  ``h_ls`` may be a stack of
    estimates along the leading axes.
    """
    if sigma2 is None:
        sigma2 = float(noise_variance(snr_db))
    R = np.asarray(R, dtype=np.complex128)
    A = R + sigma2 * np.eye(R.shape[0])
    try:
        c, lower = cho_factor(A, lower=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"regularized correlation matrix is not positive definite: {exc}") from exc
    rcond, info = zpocon(c, np.linalg.norm(A, 1))
    if info != 0 or rcond < RCOND_LIMIT:
        raise SingularSystemError(f"regularized correlation matrix is singular (rcond={rcond:.2e})")
    h_ls = np.asarray(h_ls)
    z = cho_solve((c, lower), h_ls.reshape(-1, R.shape[0]).T, check_finite=False)
    return (R @ z).T.reshape(h_ls.shape)


def interpolate_estimate(pilot_estimates, layout: PilotLayout) -> np.ndarray:
    """Linear interpolation between pilots; subcarriers past the last pilot
    copy the nearest pilot value."""
    pilot_estimates = np.asarray(pilot_estimates)
    if layout.n_pilots < 2:
        raise StructureError("interpolation needs at least two pilots")
    xp = layout.pilot_indices
    k = np.clip(np.arange(layout.n_sub), xp[0], xp[-1])
    right = np.clip(np.searchsorted(xp, k, side="right"), 1, xp.size - 1)
    left = right - 1
    w = (k - xp[left]) / (xp[right] - xp[left])
    out = (1.0 - w) * pilot_estimates[..., left] + w * pilot_estimates[..., right]
    return out


def estimate_channel(y, layout: PilotLayout, method, *, snr_db=None, R=None, true_cfr=None):
    """Full-band estimate for one of the benchmark methods."""
    method = EstimateMethod(method)
    if method is EstimateMethod.TRUE:
        if true_cfr is None:
            raise StructureError("true-channel detection needs the true CFR")
        return ChannelEstimate(np.asarray(true_cfr), method)
    h = ls_estimate(np.asarray(y)[..., layout.pilot_indices], layout.pilot_symbols)
    if method is not EstimateMethod.LS:
        if R is None:
            raise StructureError(f"{method.value} needs a correlation matrix")
        h = mmse_estimate(h, R, snr_db)
    return ChannelEstimate(interpolate_estimate(h, layout), method)


def ml_detect(y, est: ChannelEstimate, layout: PilotLayout) -> EqualizedSymbol:
    y_d = np.asarray(y)[..., layout.data_indices]
    h_d = np.asarray(est.h_hat)[..., layout.data_indices]
    mag = np.abs(h_d)
    guarded = mag < ZERO_GUARD
    if guarded.any():
        phase = np.where(mag > 0, h_d / np.where(mag > 0, mag, 1), 1.0)
        h_d = np.where(guarded, ZERO_GUARD * phase, h_d)
    eq = y_d / h_d
    x_hat = (np.where(eq.real < 0, -1.0, 1.0) + 1j * np.where(eq.imag < 0, -1.0, 1.0)) * SQRT_HALF
    return EqualizedSymbol(x_hat, demap_qpsk_hard(eq), guarded)


def bit_error_rate(tx, rx) -> float:
    tx, rx = np.asarray(tx), np.asarray(rx)
    if tx.shape != rx.shape:
        raise StructureError(f"bit blocks differ in shape: {tx.shape} vs {rx.shape}")
    if tx.size == 0:
        return 0.0
    return float(np.count_nonzero(tx != rx)) / tx.size
