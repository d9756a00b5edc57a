"""Transmit an 8-bit grayscale image over the simulated link and rebuild it."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Optional

import numpy as np
from PIL import Image

from ..models import NetworkBundle
from ..phy import OfdmConfig
from ..receivers import bit_error_rate
from ..rng import substream
from .config import ScenarioConfig
from .dataset import simulate_symbols
from .sweep import channel_classes, decode, mixture_correlation, resolve_methods

NOISELESS_SNR_DB = 40.0


def read_pgm(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"), dtype=np.uint8)
    except OSError as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc


def write_pgm(pixels: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="L").save(path, format="PPM")


def synthetic_image(size: int = 64) -> np.ndarray:
    """Deterministic grayscale pattern used when no image is supplied."""
    y, x = np.mgrid[0:size, 0:size]
    ramp = (x * 255 // max(size - 1, 1)).astype(np.int64)
    disc = ((x - size / 2) ** 2 + (y - size / 2) ** 2) < (size / 4) ** 2
    checks = ((x // 8 + y // 8) % 2).astype(bool)
    img = np.where(disc, 255 - ramp, ramp)
    img = np.where(checks & ~disc, img // 2, img)
    return img.astype(np.uint8)


def run_image_demo(pixels: np.ndarray, method: str, snr_db: Optional[float], channel: str,
                   scn: ScenarioConfig, bundles: Optional[Dict[str, NetworkBundle]] = None):
    """Send ``pixels`` one OFDM symbol at a time and decode with ``method``.

    ``snr_db=None`` gives a noiseless link.  Returns the reconstructed image
    and the BER over the payload bits (tail padding excluded).
    """
    bundles = bundles or {}
    cfg = OfdmConfig.with_pilots(scn.n_pilots)
    pixels = np.asarray(pixels, dtype=np.uint8)
    payload = np.unpackbits(pixels.ravel())
    bps = cfg.bits_per_symbol
    n_sym = -(-payload.size // bps)
    tx = np.zeros(n_sym * bps, dtype=np.uint8)
    tx[:payload.size] = payload
    decoders = resolve_methods([method], channel, bundles)
    if not decoders:
        raise ValueError(f"method {method} is not defined on channel {channel}")
    bundle = decoders[0][1]
    rng = substream(scn.seed, 6)
    classes = channel_classes(channel, scn)
    batch = simulate_symbols(cfg, classes, snr_db, rng, bits=tx.reshape(n_sym, bps))
    # a noiseless link still needs a finite regularizer for the MMSE solve
    est_snr = NOISELESS_SNR_DB if snr_db is None else snr_db
    corr = None
    if method.startswith("MMSE"):
        corr = mixture_correlation(classes, cfg, est_snr, substream(scn.seed, 7), scn.m_h)
    rx = decode(method, bundle, batch, cfg.layout, est_snr, corr).ravel()
    rx_payload = rx[:payload.size]
    image = np.packbits(rx_payload).reshape(pixels.shape)
    return image, bit_error_rate(payload, rx_payload)


def load_image(scn: ScenarioConfig, path=None) -> np.ndarray:
    path = path or scn.image
    return synthetic_image() if path is None else read_pgm(Path(path))
