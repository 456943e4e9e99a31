"""Uplink propagation from the UE to a TRP on the SRS resource grid."""
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))

    def as_array(self):
        return np.array([self.x, self.y, self.z])

    @classmethod
    def from_seq(cls, values):
        x, y, z = values
        return cls(float(x), float(y), float(z))

    def distance_to(self, other):
        return float(np.linalg.norm(self.as_array() - other.as_array()))


@dataclass(frozen=True)
class Path:
    delay_s: float
    gain: complex = 1.0 + 0j


@dataclass(frozen=True)
class ChannelModel:
    """Tapped-delay channel.  ``paths[0]`` is the line-of-sight path."""

    paths: tuple = field(default_factory=lambda: (Path(0.0),))
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        paths = tuple(p if isinstance(p, Path) else Path(*p) for p in self.paths)
        if not paths:
            raise ValueError("channel needs at least one path")
        for p in paths:
            if not (np.isfinite(p.delay_s) and p.delay_s >= 0):
                raise ValueError(f"path delay must be finite and >= 0, got {p.delay_s!r}")
        if not self.noise_std >= 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std!r}")
        object.__setattr__(self, "paths", paths)


def geometric_delay(trp, ue):
    """Line-of-sight propagation delay in seconds."""
    return trp.distance_to(ue) / SPEED_OF_LIGHT


def frequency_response(cfg, model):
    """Per-subcarrier response sum(gain * exp(-j 2 pi f_k delay)) over the band."""
    f_k = cfg.baseband_index * cfg.subcarrier_spacing_hz
    resp = np.zeros(cfg.n_sc, dtype=np.complex128)
    for p in model.paths:
        resp += complex(p.gain) * np.exp(-2j * np.pi * f_k * p.delay_s)
    return resp


def apply_channel(tx, cfg, model):
    tx = np.asarray(tx)
    if tx.shape != cfg.grid_shape:
        raise ValueError(f"grid shape {tx.shape} does not match config {cfg.grid_shape}")
    symbol_duration = cfg.n_fft * cfg.sample_period_s
    for p in model.paths:
        if p.delay_s >= symbol_duration:
            raise ValueError(
                f"path delay {p.delay_s:.3e} s exceeds one OFDM symbol ({symbol_duration:.3e} s)"
            )
    rx = tx * frequency_response(cfg, model)
    if model.noise_std > 0:
        rng = np.random.default_rng(model.seed)
        noise = rng.standard_normal(tx.shape) + 1j * rng.standard_normal(tx.shape)
        rx = rx + model.noise_std * noise
    return rx
