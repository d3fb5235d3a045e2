"""Reference-signal generation and resource-grid mapping.

One slot is a K x M grid of complex resource elements (K subcarriers,
M OFDM symbols).  Pilot symbols are QPSK values drawn from a length-31
Gold sequence and placed on a comb occupying every second subcarrier of
the configured pilot-bearing OFDM symbols; all other grid entries are
zero on the transmit side.
"""

from dataclasses import dataclass, field

import numpy as np

_NC = 1600  # Gold generator warm-up advance


@dataclass(frozen=True)
class GridConfig:
    """Dimensions and numerology of one slot."""

    num_subcarriers: int
    num_symbols: int
    scs_khz: float
    carrier_hz: float
    cp_len: int

    def __post_init__(self):
        k, m = self.num_subcarriers, self.num_symbols
        if k < 2 or k % 2 != 0:
            raise ValueError(f"num_subcarriers must be even and >= 2, got {k}")
        if m < 1:
            raise ValueError(f"num_symbols must be >= 1, got {m}")
        if not 0 <= self.cp_len < k:
            raise ValueError(f"cp_len must satisfy 0 <= cp_len < K, got {self.cp_len}")
        if self.scs_khz <= 0 or self.carrier_hz <= 0:
            raise ValueError("scs_khz and carrier_hz must be positive")

    @property
    def sample_rate_hz(self) -> float:
        """Nominal sampling rate: K subcarriers at the configured spacing."""
        return self.num_subcarriers * self.scs_khz * 1e3


@dataclass(frozen=True)
class PilotConfig:
    """Placement and scrambling of the pilot pattern."""

    dmrs_symbol_indices: tuple = (2, 11)
    comb_offset: int = 0
    scrambling_id: int = 0
    slot_number: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dmrs_symbol_indices",
                           tuple(sorted(self.dmrs_symbol_indices)))
        if len(self.dmrs_symbol_indices) < 1:
            raise ValueError("at least one pilot-bearing symbol is required")
        if self.comb_offset not in (0, 1):
            raise ValueError(f"comb_offset must be 0 or 1, got {self.comb_offset}")
        if self.scrambling_id < 0 or self.slot_number < 0:
            raise ValueError("scrambling_id and slot_number must be non-negative")

    def validate_against(self, grid: GridConfig) -> None:
        for m in self.dmrs_symbol_indices:
            if not 0 <= m < grid.num_symbols:
                raise ValueError(
                    f"pilot symbol index {m} outside grid with M={grid.num_symbols}")


def gold_sequence(c_init: int, length: int) -> np.ndarray:
    """Length-31 Gold sequence c(n), n = 0..length-1.

    Two LFSRs:  x1(n+31) = (x1(n+3) + x1(n)) mod 2 seeded with 1,0,...,0 and
    x2(n+31) = (x2(n+3) + x2(n+2) + x2(n+1) + x2(n)) mod 2 seeded with the
    binary expansion of ``c_init`` (LSB first).  The output is
    c(n) = (x1(n+1600) + x2(n+1600)) mod 2.

    Returns a uint8 array of 0/1 bits.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    if not 0 <= c_init < 2**31:
        raise ValueError(f"c_init must be a 31-bit non-negative integer, got {c_init}")

    n_total = length + _NC + 31
    x1 = np.zeros(n_total, dtype=np.uint8)
    x2 = np.zeros(n_total, dtype=np.uint8)
    x1[0] = 1
    for i in range(31):
        x2[i] = (c_init >> i) & 1
    for n in range(n_total - 31):
        x1[n + 31] = (x1[n + 3] + x1[n]) % 2
        x2[n + 31] = (x2[n + 3] + x2[n + 2] + x2[n + 1] + x2[n]) % 2
    return (x1[_NC:_NC + length] + x2[_NC:_NC + length]) % 2


def pilot_c_init(pilots: PilotConfig, symbol_index: int) -> int:
    """Scrambling initializer for one pilot-bearing symbol.

    Mirrors the structure of standard per-symbol initializers: the slot/symbol
    counter scaled to the high bits, the scrambling identity mixed into both
    factors, reduced mod 2^31.
    """
    n_id = pilots.scrambling_id
    sym_term = 14 * pilots.slot_number + symbol_index + 1
    return (2**17 * sym_term * (2 * n_id + 1) + 2 * n_id) % 2**31


def generate_dmrs_sequence(grid: GridConfig, pilots: PilotConfig,
                           symbol_index: int) -> np.ndarray:
    """QPSK pilot sequence for one pilot-bearing symbol.

    r(i) = (1 - 2 c(2i))/sqrt(2) + j (1 - 2 c(2i+1))/sqrt(2), length K/2.
    """
    pilots.validate_against(grid)
    if symbol_index not in pilots.dmrs_symbol_indices:
        raise ValueError(
            f"symbol {symbol_index} is not a pilot-bearing symbol "
            f"{pilots.dmrs_symbol_indices}")
    n_pilots = grid.num_subcarriers // 2
    c = gold_sequence(pilot_c_init(pilots, symbol_index), 2 * n_pilots)
    c = c.astype(np.float64)
    return ((1.0 - 2.0 * c[0::2]) + 1j * (1.0 - 2.0 * c[1::2])) / np.sqrt(2.0)


def map_pilots(grid: GridConfig, pilots: PilotConfig):
    """Build the transmit grid: pilots on the comb, zeros elsewhere.

    Returns ``(X, positions)`` where ``X`` is the complex (K, M) transmit grid
    and ``positions`` is a list of (subcarrier, symbol) index pairs sorted by
    (symbol, subcarrier).
    """
    pilots.validate_against(grid)
    k, m = grid.num_subcarriers, grid.num_symbols
    x = np.zeros((k, m), dtype=np.complex128)
    subcarriers = 2 * np.arange(k // 2) + pilots.comb_offset
    positions = []
    for sym in pilots.dmrs_symbol_indices:
        x[subcarriers, sym] = generate_dmrs_sequence(grid, pilots, sym)
        positions.extend((int(kk), int(sym)) for kk in subcarriers)
    return x, positions
