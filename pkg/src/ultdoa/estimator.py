"""gNB-PHY time-of-arrival pipeline and measurement reporting.

Array layout throughout is ``(n_rx, p_rx, n_symb_srs, ...)``:

* ``ls_estimate``          -> (..., m_sc)     channel at the comb pilots
* ``interpolate_estimate`` -> (..., n_sc)     comb gaps filled
* ``embed_band``           -> (..., n_fft)    band placed in FFT bins
* ``oversample_frequency`` -> (..., L*n_fft)  zero-inserted at Nyquist
* ``to_time_domain``       -> (..., L*n_fft)  channel impulse response
"""
import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels

T_C = 1.0 / (480_000 * 4096)
DEFAULT_WINDOW_FRACTION = 0.07
NO_PEAK_RATIO = 1e-12

SRS_USAGE_LOCALIZATION = 5
REPORT_TYPE_LOCALIZATION = 1
REPORT_TYPE_LABELS = {REPORT_TYPE_LOCALIZATION: "Localization"}


class EstimationError(ValueError):
    pass


class NoPeakError(EstimationError):
    pass


class CombFilters(NamedTuple):
    """(k_tc, 2) tap pairs for the three comb regimes.

    ``start`` fills below the first pilot from the (first, second) pilots,
    ``middle`` fills each gap from the (previous, current) pilots and ``end``
    fills above the last pilot from the (second-to-last, last) pilots.
    """

    start: np.ndarray
    middle: np.ndarray
    end: np.ndarray


def linear_filters(k_tc):
    """Complex-linear interpolation inside the comb, linear extrapolation at the edges.

    Extrapolating (rather than holding the edge pilot) keeps the phase slope of
    a delayed channel across the band edge, so the impulse response stays
    symmetric about the true delay.
    """
    j = np.arange(1, k_tc + 1) / k_tc
    middle = np.stack([1.0 - j, j], axis=1)
    start = np.stack([1.0 + j, -j], axis=1)
    end = np.stack([-j, 1.0 + j], axis=1)
    return CombFilters(start, middle, end)


def hold_filters(k_tc):
    """Linear inside the comb, edge pilots replicated outwards."""
    j = np.arange(1, k_tc + 1) / k_tc
    middle = np.stack([1.0 - j, j], axis=1)
    start = np.tile([1.0, 0.0], (k_tc, 1))
    end = np.tile([0.0, 1.0], (k_tc, 1))
    return CombFilters(start, middle, end)


@dataclass(frozen=True)
class ToaMeasurement:
    trp_id: int
    toa_s: float
    peak_index: int
    ul_rtoa_index: int
    rsrp_dbfs: float
    rx_tx_diff_s: float = 0.0
    rtoa_k: int = 0


@dataclass(frozen=True)
class SrsIndicationReport:
    offsets_ns: tuple
    srs_usage_type: int = SRS_USAGE_LOCALIZATION
    report_type: str = "Localization"

    def to_bytes(self):
        tag = {v: k for k, v in REPORT_TYPE_LABELS.items()}[self.report_type]
        head = struct.pack(">BBH", self.srs_usage_type, tag, len(self.offsets_ns))
        return head + struct.pack(f">{len(self.offsets_ns)}H", *self.offsets_ns)

    @classmethod
    def from_bytes(cls, data):
        if len(data) < 4:
            raise ValueError("SRS indication shorter than its 4-byte header")
        usage, tag, count = struct.unpack_from(">BBH", data)
        if len(data) != 4 + 2 * count:
            raise ValueError(f"expected {4 + 2 * count} bytes for {count} offsets, got {len(data)}")
        if tag not in REPORT_TYPE_LABELS:
            raise ValueError(f"unknown report type tag {tag}")
        offsets = struct.unpack_from(f">{count}H", data, 4)
        return cls(tuple(offsets), usage, REPORT_TYPE_LABELS[tag])


# --------------------------------------------------------------------------
# pipeline stages
# --------------------------------------------------------------------------
def ls_estimate(rx, seq, cfg):
    """Least-squares channel Y/X at every comb pilot of every symbol."""
    rx = np.asarray(rx)
    seq = np.asarray(seq)
    if rx.shape != cfg.grid_shape:
        raise ValueError(f"grid shape {rx.shape} does not match config {cfg.grid_shape}")
    if seq.shape != (cfg.m_sc,):
        raise ValueError(f"sequence length {seq.shape} does not match m_sc={cfg.m_sc}")
    if np.any(seq == 0):
        raise EstimationError("pilot sequence contains a zero value")
    return rx[..., cfg.comb_positions] / seq


def interpolate_estimate(h, cfg, filters=None):
    h = np.asarray(h, dtype=np.complex128)
    if h.shape[-1] != cfg.m_sc:
        raise ValueError(f"expected {cfg.m_sc} pilots on the last axis, got {h.shape[-1]}")
    if filters is None:
        filters = linear_filters(cfg.k_tc)
    lead = h.shape[:-1]
    flat = np.ascontiguousarray(h.reshape(-1, cfg.m_sc))
    out = kernels.comb_interpolate(
        flat,
        cfg.k0,
        cfg.k_tc,
        cfg.n_sc,
        np.asarray(filters.start, dtype=np.float64),
        np.asarray(filters.middle, dtype=np.float64),
        np.asarray(filters.end, dtype=np.float64),
    )
    return out.reshape(lead + (cfg.n_sc,))


def embed_band(h, cfg):
    """Place the (..., n_sc) band into (..., n_fft) FFT bins, zero elsewhere."""
    h = np.asarray(h)
    out = np.zeros(h.shape[:-1] + (cfg.n_fft,), dtype=np.complex128)
    out[..., cfg.fft_bins] = h
    return out


def oversample_frequency(h, cfg):
    h = np.asarray(h)
    L = cfg.oversampling
    if L < 1:
        raise ValueError(f"oversampling factor must be >= 1, got {L}")
    n = cfg.n_fft
    if h.shape[-1] != n:
        raise ValueError(f"expected {n} FFT bins on the last axis, got {h.shape[-1]}")
    out = np.zeros(h.shape[:-1] + (L * n,), dtype=np.complex128)
    out[..., : n // 2] = h[..., : n // 2]
    out[..., L * n - n // 2 :] = h[..., n // 2 :]
    return out


def to_time_domain(h_over, cfg):
    h_over = np.asarray(h_over)
    if h_over.shape[-1] != cfg.oversampled_length:
        raise ValueError(f"expected length {cfg.oversampled_length}, got {h_over.shape[-1]}")
    # numpy's ifft already carries the 1/(L*n_fft) normalisation
    return np.fft.ifft(h_over, axis=-1)


def default_window(cfg):
    return (0, int(np.ceil(cfg.oversampled_length * DEFAULT_WINDOW_FRACTION)))


def _check_window(window, cfg):
    lo, hi = int(window[0]), int(window[1])
    if lo < 0 or hi > cfg.oversampled_length:
        raise ValueError(f"peak search window {window!r} outside [0, {cfg.oversampled_length})")
    if hi <= lo:
        raise ValueError(f"empty peak search window {window!r}")
    return lo, hi


def averaged_power(cirs):
    cirs = np.ascontiguousarray(cirs, dtype=np.complex128)
    if cirs.ndim != 4:
        raise ValueError(f"expected (n_rx, p_rx, n_symb, T) impulse responses, got {cirs.shape}")
    return kernels.averaged_power(cirs)


def detect_peak(cirs, cfg, window=None):
    """Argmax of the symbol-averaged CIR power per antenna inside ``window``.

    ``np.argmax`` returns the first maximum, which is the smallest index.
    """
    lo, hi = _check_window(window if window is not None else default_window(cfg), cfg)
    power = averaged_power(cirs)
    return lo + np.argmax(power[:, lo:hi], axis=1)


def toa_seconds(peak_index, cfg):
    if not 0 <= peak_index < cfg.oversampled_length:
        raise ValueError(f"peak index {peak_index} outside [0, {cfg.oversampled_length})")
    return (peak_index / cfg.oversampling) * cfg.sample_period_s


def channel_impulse_response(rx, seq, cfg, filters=None):
    h = ls_estimate(rx, seq, cfg)
    h = interpolate_estimate(h, cfg, filters)
    h = oversample_frequency(embed_band(h, cfg), cfg)
    return to_time_domain(h, cfg)


def estimate_toa(rx, seq, cfg, window=None, trp_id=0, rtoa_k=0, filters=None):
    """Run the whole pipeline; returns one ``ToaMeasurement`` per receive antenna."""
    h_ls = ls_estimate(rx, seq, cfg)
    h = interpolate_estimate(h_ls, cfg, filters)
    cirs = to_time_domain(oversample_frequency(embed_band(h, cfg), cfg), cfg)

    lo, hi = _check_window(window if window is not None else default_window(cfg), cfg)
    power = averaged_power(cirs)
    pilot_power = float(np.mean(np.abs(seq) ** 2))
    peaks = lo + np.argmax(power[:, lo:hi], axis=1)

    out = []
    for n, peak in enumerate(peaks):
        peak = int(peak)
        if not power[n, peak] > NO_PEAK_RATIO * pilot_power:
            raise NoPeakError(f"no detectable peak on antenna {n} (max power {power[n, peak]:.3e})")
        mean_h = float(np.mean(np.abs(h_ls[n]) ** 2))
        toa = toa_seconds(peak, cfg)
        out.append(
            ToaMeasurement(
                trp_id=trp_id,
                toa_s=toa,
                peak_index=peak,
                ul_rtoa_index=quantize_ul_rtoa(toa, rtoa_k),
                rsrp_dbfs=10.0 * np.log10(mean_h),
                rx_tx_diff_s=0.0,
                rtoa_k=rtoa_k,
            )
        )
    return out


# --------------------------------------------------------------------------
# UL-RTOA reporting
# --------------------------------------------------------------------------
def rtoa_step(k):
    if not 0 <= int(k) <= 5:
        raise ValueError(f"UL-RTOA resolution k must lie in [0, 5], got {k}")
    return T_C * 2 ** int(k)


def quantize_ul_rtoa(toa_s, k):
    step = rtoa_step(k)
    if not toa_s >= 0:
        raise ValueError(f"ToA must be non-negative, got {toa_s!r}")
    return int(np.rint(toa_s / step))


def dequantize_ul_rtoa(index, k):
    return int(index) * rtoa_step(k)


def encode_srs_indication(measurements):
    offsets = []
    for m in measurements:
        ns = int(np.rint(m.toa_s * 1e9))
        if not 0 <= ns <= 0xFFFF:
            raise OverflowError(f"ToA {m.toa_s:.3e} s = {ns} ns does not fit in 16 bits")
        offsets.append(ns)
    return SrsIndicationReport(tuple(offsets))
