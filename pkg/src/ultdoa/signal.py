"""Positioning SRS generation and comb mapping onto the OFDM resource grid.

A resource grid is a complex ndarray shaped ``(n_rx, p_rx, n_symb_srs, n_sc)``.
Subcarrier ``k`` of the allocated band sits at baseband index
``k - n_sc // 2`` (the band is centred on DC), which is also the FFT bin it is
embedded into, modulo ``n_fft``.
"""
from dataclasses import asdict, dataclass, replace

import numpy as np

DEFAULT_SAMPLE_RATE_HZ = 61.44e6
ALLOWED_COMB_SIZES = (1, 2, 4, 8)


def _is_power_of_two(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SrsConfig:
    """SRS/OFDM numerology.

    Defaults are the 106-PRB, 30 kHz band n78 carrier sampled at 61.44 Msps
    with comb-2 SRS over the whole allocation and 16x oversampling.
    """

    k_tc: int = 2
    m_sc: int = 636
    n_sc: int = 1272
    n_fft: int = 2048
    k0: int = 0
    n_symb_srs: int = 1
    n_rx: int = 1
    p_rx: int = 1
    oversampling: int = 16
    sample_period_s: float = 1.0 / DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("k_tc", "m_sc", "n_sc", "n_fft", "n_symb_srs", "n_rx", "p_rx", "oversampling"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value <= 0:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if isinstance(self.k0, bool) or not isinstance(self.k0, (int, np.integer)) or self.k0 < 0:
            raise ValueError(f"k0 must be a non-negative integer, got {self.k0!r}")
        if self.k_tc not in ALLOWED_COMB_SIZES:
            raise ValueError(f"k_tc must be one of {ALLOWED_COMB_SIZES}, got {self.k_tc}")
        if not _is_power_of_two(self.n_fft):
            raise ValueError(f"n_fft must be a power of two, got {self.n_fft}")
        if not _is_power_of_two(self.oversampling):
            raise ValueError(f"oversampling must be a power of two, got {self.oversampling}")
        if not self.m_sc * self.k_tc <= self.n_sc <= self.n_fft:
            raise ValueError(
                f"need m_sc*k_tc <= n_sc <= n_fft, got {self.m_sc}*{self.k_tc}, {self.n_sc}, {self.n_fft}"
            )
        if self.k0 + (self.m_sc - 1) * self.k_tc >= self.n_sc:
            raise ValueError("last comb subcarrier k0 + (m_sc-1)*k_tc falls outside n_sc")
        if not (np.isfinite(self.sample_period_s) and self.sample_period_s > 0):
            raise ValueError(f"sample_period_s must be positive, got {self.sample_period_s!r}")

    @property
    def comb_positions(self):
        return self.k0 + self.k_tc * np.arange(self.m_sc)

    @property
    def grid_shape(self):
        return (self.n_rx, self.p_rx, self.n_symb_srs, self.n_sc)

    @property
    def oversampled_length(self):
        return self.oversampling * self.n_fft

    @property
    def subcarrier_spacing_hz(self):
        return 1.0 / (self.n_fft * self.sample_period_s)

    @property
    def baseband_index(self):
        """Signed subcarrier index of each grid subcarrier relative to DC."""
        return np.arange(self.n_sc) - self.n_sc // 2

    @property
    def fft_bins(self):
        return np.mod(self.baseband_index, self.n_fft)

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)


def largest_prime_at_most(n):
    for cand in range(int(n), 1, -1):
        if all(cand % d for d in range(2, int(cand**0.5) + 1)):
            return cand
    raise ValueError(f"no prime <= {n}")


def zadoff_chu_length(m_sc):
    return largest_prime_at_most(m_sc)


def generate_srs_sequence(cfg, root):
    """Zadoff-Chu base sequence cyclically extended to ``cfg.m_sc`` samples.

    The ZC length is the largest prime not exceeding ``m_sc``; being prime,
    every root in ``[1, N_ZC)`` is coprime with it.
    """
    n_zc = zadoff_chu_length(cfg.m_sc)
    root = int(root)
    if not 1 <= root < n_zc:
        raise ValueError(f"root must lie in [1, {n_zc}), got {root}")
    n = np.arange(cfg.m_sc) % n_zc
    # reduce q*n*(n+1) mod 2*N_ZC in integers so the phase stays exact for long sequences
    phase_num = (root * n * (n + 1)) % (2 * n_zc)
    return np.exp(-1j * np.pi * phase_num / n_zc)


def map_to_grid(seq, cfg):
    seq = np.asarray(seq, dtype=np.complex128)
    if seq.shape != (cfg.m_sc,):
        raise ValueError(f"sequence length {seq.shape} does not match m_sc={cfg.m_sc}")
    grid = np.zeros(cfg.grid_shape, dtype=np.complex128)
    grid[..., cfg.comb_positions] = seq
    return grid
