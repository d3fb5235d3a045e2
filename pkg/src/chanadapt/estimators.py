"""Classical channel estimation baselines and data conditioning.

The pilot-division estimate is defined only on the pilot comb; linear
interpolation fills the remaining grid, first across subcarriers within each
pilot-bearing symbol and then across symbols, with nearest-value
extrapolation at the edges.  Min-max normalization maps the pooled real and
imaginary entries of one grid onto [-1, 1] and is inverted exactly after
model refinement.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError

ESTIMATE_KINDS = ("ls", "li", "ls_cnn", "li_cnn", "ls_gan", "li_gan")


@dataclass
class EstimateGrid:
    """A complex (K, M) channel estimate tagged with the method that made it."""

    values: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in ESTIMATE_KINDS:
            raise ValueError(f"unknown estimate kind {self.kind!r}")


@dataclass(frozen=True)
class NormState:
    """Constants recorded by minmax_normalize, needed to invert it."""

    min_val: float
    max_val: float

    def __post_init__(self):
        if not self.max_val > self.min_val:
            raise DegenerateInputError(
                f"degenerate normalization range [{self.min_val}, {self.max_val}]")


def ls_estimate(y_grid: np.ndarray, x_grid: np.ndarray, pilot_positions) -> EstimateGrid:
    """Pilot-division estimate: Y/X at pilots, zero elsewhere."""
    if y_grid.shape != x_grid.shape:
        raise ValueError(f"shape mismatch {y_grid.shape} vs {x_grid.shape}")
    est = np.zeros_like(y_grid, dtype=np.complex128)
    ks = np.array([p[0] for p in pilot_positions], dtype=int)
    ms = np.array([p[1] for p in pilot_positions], dtype=int)
    pilots = x_grid[ks, ms]
    if np.any(np.abs(pilots) == 0):
        raise ValueError("zero transmit amplitude at a pilot position")
    est[ks, ms] = y_grid[ks, ms] / pilots
    return EstimateGrid(values=est, kind="ls")


def _interp_columns(values, sample_idx, length):
    """Linear interpolation along axis 0 with nearest-edge extrapolation.

    ``values`` holds rows sampled at ``sample_idx``; result has ``length``
    rows.  Interpolation weights are real, so the real and imaginary parts of
    a complex input are interpolated independently by construction.
    """
    sample_idx = np.asarray(sample_idx)
    if len(sample_idx) == 1:
        return np.repeat(values, length, axis=0)
    targets = np.arange(length)
    right = np.clip(np.searchsorted(sample_idx, targets, side="left"),
                    1, len(sample_idx) - 1)
    left = right - 1
    x0, x1 = sample_idx[left], sample_idx[right]
    w = (targets - x0) / (x1 - x0)
    w = np.clip(w, 0.0, 1.0)[:, None]  # nearest-value extrapolation outside
    return (1.0 - w) * values[left, :] + w * values[right, :]


def linear_interpolate(ls: EstimateGrid, pilot_positions) -> EstimateGrid:
    """Fill the full grid from the pilot comb: frequency first, then time."""
    if ls.kind != "ls":
        raise ValueError(f"expected an 'ls' estimate, got {ls.kind!r}")
    k, m = ls.values.shape
    pilot_syms = sorted({p[1] for p in pilot_positions})
    if len(pilot_syms) < 1:
        raise ValueError("interpolation needs at least one pilot-bearing symbol")
    pilot_ks = np.array(sorted({p[0] for p in pilot_positions}), dtype=int)

    per_sym = np.stack(
        [_interp_columns(ls.values[pilot_ks, sym][:, None], pilot_ks, k)[:, 0]
         for sym in pilot_syms], axis=1)
    full = _interp_columns(per_sym.T, pilot_syms, m).T
    return EstimateGrid(values=full, kind="li")


def minmax_normalize(grid_values: np.ndarray):
    """Map pooled real/imag entries onto [-1, 1]; returns (normalized, state)."""
    pooled_min = float(min(grid_values.real.min(), grid_values.imag.min()))
    pooled_max = float(max(grid_values.real.max(), grid_values.imag.max()))
    if not pooled_max > pooled_min:
        raise DegenerateInputError(
            f"constant grid cannot be normalized (value {pooled_min})")
    state = NormState(min_val=pooled_min, max_val=pooled_max)
    scale = 2.0 / (pooled_max - pooled_min)
    re = (grid_values.real - pooled_min) * scale - 1.0
    im = (grid_values.imag - pooled_min) * scale - 1.0
    return re + 1j * im, state


def minmax_denormalize(normalized: np.ndarray, state: NormState) -> np.ndarray:
    """Exact inverse of :func:`minmax_normalize` under the recorded state."""
    half_span = (state.max_val - state.min_val) / 2.0
    re = (normalized.real + 1.0) * half_span + state.min_val
    im = (normalized.imag + 1.0) * half_span + state.min_val
    return re + 1j * im


def nmse(est_values: np.ndarray, truth_values: np.ndarray) -> float:
    """Squared-error energy of the estimate relative to the truth's energy."""
    if est_values.shape != truth_values.shape:
        raise ValueError(f"shape mismatch {est_values.shape} vs {truth_values.shape}")
    denom = float(np.sum(np.abs(truth_values) ** 2))
    if denom == 0.0:
        raise ValueError("true channel has zero norm")
    return float(np.sum(np.abs(est_values - truth_values) ** 2)) / denom


def nmse_db(est_values: np.ndarray, truth_values: np.ndarray) -> float:
    return 10.0 * np.log10(nmse(est_values, truth_values))


def mean_nmse_db(per_sample_nmse) -> float:
    """Dataset-level metric: mean of per-sample linear NMSE, in dB."""
    arr = np.asarray(list(per_sample_nmse), dtype=float)
    if arr.size == 0:
        raise ValueError("no samples")
    return float(10.0 * np.log10(arr.mean()))
