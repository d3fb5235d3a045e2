"""Channel synthesis from propagation paths.

Two equivalent views of the same multipath channel are produced:

* a frequency-domain grid ``H(k, m)`` built directly from path delays and
  phases (time-invariant across the slot), and
* a time-domain tap matrix ``h(n, m)`` that places each path on its nearest
  sample and carries an optional per-path Doppler rotation.

With all Dopplers at zero and the shared nearest-sample delay rounding, the
forward DFT of the tap matrix reproduces the frequency grid exactly; tests
rely on that identity.  The DFT convention is fixed package-wide: forward
transform without scaling, inverse with 1/N.
"""

from dataclasses import dataclass

import numpy as np

from .grids import GridConfig

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class RayPath:
    """One propagation path."""

    amplitude: float
    phase: float
    delay_s: float
    doppler_hz: float = 0.0
    aoa_az: float = 0.0
    aoa_el: float = 0.0
    aod_az: float = 0.0
    aod_el: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.delay_s < 0:
            raise ValueError(f"delay_s must be >= 0, got {self.delay_s}")


@dataclass(frozen=True)
class PathSet:
    """All paths reaching one receiver position (may be empty: deep outage)."""

    paths: tuple
    ue_position: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        object.__setattr__(self, "ue_position", tuple(float(v) for v in self.ue_position))

    def __len__(self):
        return len(self.paths)


@dataclass
class ChannelImpulse:
    """Per-symbol channel taps, shape (N, M) with N == K."""

    taps: np.ndarray
    sample_rate_hz: float
    dropped_paths: int = 0


def _delay_samples(path: RayPath, sample_rate_hz: float) -> int:
    # Fractional delays are snapped to the nearest sample in both channel
    # views; sub-sample modelling is out of scope.
    return int(round(path.delay_s * sample_rate_hz))


def qscm_frequency_response(paths: PathSet, grid: GridConfig) -> np.ndarray:
    """Quasi-static frequency response, complex (K, M), all columns equal.

    H(k, m) = sum_l  a_l * exp(j(phi_l - 2*pi*k*d_l/K)) with d_l the path
    delay in samples at the grid sampling rate.  Doppler is ignored.
    """
    k = grid.num_subcarriers
    ks = np.arange(k)
    col = np.zeros(k, dtype=np.complex128)
    for p in paths.paths:
        d = _delay_samples(p, grid.sample_rate_hz)
        col += p.amplitude * np.exp(1j * (p.phase - 2.0 * np.pi * ks * d / k))
    return np.tile(col[:, None], (1, grid.num_symbols))


def cdl_time_response(paths: PathSet, grid: GridConfig) -> ChannelImpulse:
    """Tap-delay-line response, complex (N, M) with N == K.

    Each path lands on tap n = round(delay * fs) with amplitude
    a_l * exp(j*phi_l) * exp(j*2*pi*f_D*n/N).  Paths whose rounded delay
    falls outside the N-sample window are dropped and counted.
    """
    n = grid.num_subcarriers
    m = grid.num_symbols
    taps = np.zeros((n, m), dtype=np.complex128)
    dropped = 0
    for p in paths.paths:
        d = _delay_samples(p, grid.sample_rate_hz)
        if d >= n:
            dropped += 1
            continue
        rot = np.exp(1j * (p.phase + 2.0 * np.pi * p.doppler_hz * d / n))
        taps[d, :] += p.amplitude * rot
    return ChannelImpulse(taps=taps, sample_rate_hz=grid.sample_rate_hz,
                          dropped_paths=dropped)


def impulse_to_grid(impulse: ChannelImpulse) -> np.ndarray:
    """Forward DFT along the sample axis, per symbol (no scaling)."""
    return np.fft.fft(impulse.taps, axis=0)


def grid_to_impulse(grid_values: np.ndarray, sample_rate_hz: float) -> ChannelImpulse:
    """Inverse DFT along the subcarrier axis, per symbol (1/N scaling)."""
    if grid_values.ndim != 2:
        raise ValueError(f"expected a (K, M) grid, got shape {grid_values.shape}")
    return ChannelImpulse(taps=np.fft.ifft(grid_values, axis=0),
                          sample_rate_hz=sample_rate_hz)


def friis_amplitude(distance_m: float, carrier_hz: float) -> float:
    """Free-space field amplitude c / (4*pi*d*f)."""
    if distance_m <= 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    if carrier_hz <= 0:
        raise ValueError(f"carrier frequency must be positive, got {carrier_hz}")
    return SPEED_OF_LIGHT / (4.0 * np.pi * distance_m * carrier_hz)


@dataclass(frozen=True)
class PathSamplerParams:
    """Parametric multipath distribution for the quasi-static source domain.

    ``num_paths_range`` is inclusive; ``los_delay_range_s`` bounds the first
    arrival; later arrivals add exponential excess delays with mean
    ``excess_delay_scale_s``.  Amplitudes decay exponentially in excess delay
    with time constant ``decay_time_s``, scaled by ``amplitude_scale`` and
    jittered log-normally with ``jitter_db`` dB standard deviation.
    """

    num_paths_range: tuple = (4, 9)
    los_delay_range_s: tuple = (0.3e-6, 0.9e-6)
    excess_delay_scale_s: float = 0.25e-6
    decay_time_s: float = 0.4e-6
    amplitude_scale: float = 0.5e-5
    jitter_db: float = 3.0

    def __post_init__(self):
        lo, hi = self.num_paths_range
        if lo < 1 or hi < lo:
            raise ValueError(f"bad num_paths_range {self.num_paths_range}")
        if self.excess_delay_scale_s <= 0 or self.decay_time_s <= 0:
            raise ValueError("delay/decay scales must be positive")


def sample_qscm_paths(params: PathSamplerParams, seed, sample_index: int = 0) -> PathSet:
    """Draw one multipath realization, deterministic per (seed, sample_index)."""
    rng = np.random.default_rng([int(seed), int(sample_index)])
    lo, hi = params.num_paths_range
    n_paths = int(rng.integers(lo, hi + 1))
    los = rng.uniform(*params.los_delay_range_s)
    excess = np.concatenate([[0.0], rng.exponential(params.excess_delay_scale_s,
                                                    size=n_paths - 1)])
    excess = np.sort(excess)
    delays = los + excess
    gains = params.amplitude_scale * np.exp(-excess / params.decay_time_s)
    gains = gains * 10.0 ** (rng.normal(0.0, params.jitter_db, size=n_paths) / 20.0)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_paths)
    aoa_az = rng.uniform(-np.pi, np.pi, size=n_paths)
    aod_az = rng.uniform(-np.pi, np.pi, size=n_paths)
    paths = [
        RayPath(amplitude=float(gains[i]), phase=float(phases[i]),
                delay_s=float(delays[i]), doppler_hz=0.0,
                aoa_az=float(aoa_az[i]), aod_az=float(aod_az[i]))
        for i in range(n_paths)
    ]
    return PathSet(paths=paths)
