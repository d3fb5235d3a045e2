"""OFDM transmit/receive chain.

Waveforms are complex (N_cp + N, M) matrices: one column per OFDM symbol,
each carrying its cyclic prefix.  Symbol tails produced by multipath spill
into the next column's prefix region, so the prefix genuinely absorbs the
inter-symbol interference instead of assuming per-symbol circular
convolution.  ``freq_domain_oracle`` provides the ideal per-subcarrier
product model the full chain must reproduce when the prefix is long enough.
"""

import math
from dataclasses import dataclass

import numpy as np

from .channels import ChannelImpulse
from .grids import GridConfig


@dataclass(frozen=True)
class NoiseSpec:
    """Additive-noise setting.  ``snr_db = inf`` disables the noise entirely."""

    snr_db: float
    seed: int = 0

    def __post_init__(self):
        if math.isnan(self.snr_db):
            raise ValueError("snr_db must not be NaN")


def ofdm_modulate(x_grid: np.ndarray, grid: GridConfig) -> np.ndarray:
    """Per-symbol inverse DFT (1/N scaling) with cyclic-prefix insertion."""
    k, m = grid.num_subcarriers, grid.num_symbols
    if x_grid.shape != (k, m):
        raise ValueError(f"grid shape {x_grid.shape} does not match ({k}, {m})")
    time = np.fft.ifft(x_grid, axis=0)
    if grid.cp_len == 0:
        return time
    return np.concatenate([time[-grid.cp_len:, :], time], axis=0)


def apply_channel(tx: np.ndarray, impulse: ChannelImpulse, grid: GridConfig) -> np.ndarray:
    """Convolve each symbol column with its tap vector, carrying tails forward.

    Output has the same (N_cp + N, M) shape as the input; the convolution
    tail of symbol m is added to the head of symbol m+1 (the tail of the last
    symbol is discarded, as would happen at a slot boundary).
    """
    n = grid.num_subcarriers
    sym_len = grid.cp_len + n
    if tx.shape[0] != sym_len:
        raise ValueError(f"waveform has {tx.shape[0]} rows, expected {sym_len}")
    taps = impulse.taps
    if taps.shape[0] > n:
        raise ValueError(f"{taps.shape[0]} taps exceed the symbol length {n}")
    m = tx.shape[1]
    rx = np.zeros_like(tx)
    carry = np.zeros(0, dtype=tx.dtype)
    for col in range(m):
        h = np.trim_zeros(taps[:, col], "b")
        if h.size == 0:
            full = np.zeros(sym_len, dtype=tx.dtype)
        else:
            full = np.convolve(tx[:, col], h)
        out = full[:sym_len].copy()
        out[: carry.size] += carry
        rx[:, col] = out
        carry = full[sym_len:]
    return rx


def add_awgn(rx: np.ndarray, noise: NoiseSpec, reference_power: float) -> np.ndarray:
    """Add circular complex Gaussian noise.

    Per-sample variance is reference_power / 10^(snr_db/10); an infinite
    snr_db returns the input unchanged.
    """
    if reference_power <= 0:
        raise ValueError(f"reference_power must be positive, got {reference_power}")
    if math.isinf(noise.snr_db):
        return rx
    sigma2 = reference_power / 10.0 ** (noise.snr_db / 10.0)
    rng = np.random.default_rng(noise.seed)
    w = rng.standard_normal(rx.shape) + 1j * rng.standard_normal(rx.shape)
    return rx + np.sqrt(sigma2 / 2.0) * w


def ofdm_demodulate(rx: np.ndarray, grid: GridConfig) -> np.ndarray:
    """Strip the cyclic prefix and apply the forward DFT per symbol."""
    k, m = grid.num_subcarriers, grid.num_symbols
    if rx.shape != (grid.cp_len + k, m):
        raise ValueError(
            f"waveform shape {rx.shape} does not match ({grid.cp_len + k}, {m})")
    return np.fft.fft(rx[grid.cp_len:, :], axis=0)


def freq_domain_oracle(x_grid: np.ndarray, h_grid: np.ndarray,
                       w_grid=None) -> np.ndarray:
    """Ideal per-resource-element model Y = X*H + W."""
    if x_grid.shape != h_grid.shape:
        raise ValueError(f"shape mismatch {x_grid.shape} vs {h_grid.shape}")
    y = x_grid * h_grid
    if w_grid is not None:
        if w_grid.shape != x_grid.shape:
            raise ValueError(f"noise grid shape {w_grid.shape} mismatch")
        y = y + w_grid
    return y
