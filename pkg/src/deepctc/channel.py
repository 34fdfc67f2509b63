"""AWGN channel, SNR accounting, and the transmit-side energy normalization.

Signals are real-valued with average power fixed to 1 per channel use by the
normalization layer, so SNR in dB is simply 1/sigma^2 in dB. All randomness
flows through counter-based Philox generators so that runs are reproducible
and workers can own independent substreams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ENERGY_EPS = 1e-20

# substream tags so the same experiment seed can feed independent generators
STREAM_INIT = 1
STREAM_BATCH = 2
STREAM_NOISE = 3
STREAM_EVAL = 4


class DegenerateSignalError(ValueError):
    """Near-zero-energy transmit signal; the transmitter branch is dead."""


@dataclass(frozen=True)
class ChannelConfig:
    """Per-channel-use SNR in dB plus the noise seed."""

    snr_db: float
    seed: int

    def __post_init__(self):
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")

    @property
    def sigma(self) -> float:
        return snr_db_to_sigma(self.snr_db)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Deterministic generator substream for (seed, key...)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


def snr_db_to_sigma(snr_db: float) -> float:
    """Noise std for unit signal power per channel use: sigma^2 = 10^(-snr/10)."""
    return math.sqrt(10.0 ** (-snr_db / 10.0))


def sigma_to_snr_db(sigma: float) -> float:
    """Inverse of snr_db_to_sigma."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return -10.0 * math.log10(sigma * sigma)


def ebn0_db_to_snr_db(ebn0_db: float, bits: int, uses: int) -> float:
    """Convert an Eb/N0 axis value to this simulator's per-use SNR.

    With unit signal power per real channel use and noise variance
    sigma^2 = N0/2, Eb/N0 = SNR / (2 R) where R = bits/uses.
    """
    if bits < 1 or uses < 1:
        raise ValueError("bits and uses must be >= 1")
    rate = bits / uses
    return ebn0_db + 10.0 * math.log10(2.0 * rate)


def snr_db_to_ebn0_db(snr_db: float, bits: int, uses: int) -> float:
    if bits < 1 or uses < 1:
        raise ValueError("bits and uses must be >= 1")
    rate = bits / uses
    return snr_db - 10.0 * math.log10(2.0 * rate)


def normalize_energy(x: np.ndarray) -> np.ndarray:
    """Scale a signal so its average power per channel use is exactly 1.

    out = x * sqrt(n / ||x||^2), hence ||out||^2 == n.
    """
    x = np.asarray(x, dtype=np.float64)
    energy = float(x @ x) if x.ndim == 1 else float((x * x).sum())
    if energy <= ENERGY_EPS:
        raise DegenerateSignalError("near-zero-energy signal (dead transmitter branch)")
    return x * math.sqrt(x.size / energy)


def normalize_energy_rows(z: np.ndarray) -> tuple[np.ndarray, dict]:
    """Row-wise energy normalization for a (batch, n) block; returns a backward cache."""
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[-1]
    energy = (z * z).sum(axis=-1, keepdims=True)
    if np.any(energy <= ENERGY_EPS):
        raise DegenerateSignalError("near-zero-energy signal (dead transmitter branch)")
    scale = np.sqrt(n / energy)
    return z * scale, {"z": z, "energy": energy, "scale": scale}


def normalize_energy_rows_backward(grad_out: np.ndarray, cache: dict) -> np.ndarray:
    """Exact Jacobian of the row-wise scaling, including the scale's dependence on z.

    d/dz [z * s(z)] applied to g gives s * (g - z * <g, z> / ||z||^2).
    """
    z = cache["z"]
    energy = cache["energy"]
    scale = cache["scale"]
    dot = (grad_out * z).sum(axis=-1, keepdims=True)
    return scale * (grad_out - z * (dot / energy))


def awgn_apply(x: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. Gaussian noise of std sigma; identity when sigma == 0.

    The noise is independent of x, so the backward pass of this layer is
    the identity.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    if sigma == 0.0:
        return x.copy()
    return x + rng.normal(0.0, sigma, size=x.shape)
