"""Per-TRP received SRS grids for a UE at a known position."""
from dataclasses import dataclass

import numpy as np

from .channel import ChannelModel, Path, apply_channel, geometric_delay
from .signal import generate_srs_sequence, map_to_grid


@dataclass(frozen=True)
class UplinkSimulator:
    """Line-of-sight uplink with optional excess-delay paths and AWGN.

    The LOS amplitude falls off as 1/d (d clipped at 1 m) so RSRP ranks TRPs by
    distance.  ``snr_db`` is the per-subcarrier SNR of the LOS path at every
    TRP; ``None`` means noiseless.  ``multipath`` holds
    ``(excess_delay_s, gain_relative_to_los)`` pairs.
    """

    ue: object
    snr_db: float = None
    multipath: tuple = ()
    seed: int = 0
    clock_offset_s: float = 0.0

    def channel_for(self, trp):
        d = trp.location.distance_to(self.ue)
        los_gain = 1.0 / max(d, 1.0)
        delay = geometric_delay(trp.location, self.ue) + self.clock_offset_s
        paths = [Path(delay, los_gain)]
        for excess, rel in self.multipath:
            paths.append(Path(delay + excess, los_gain * complex(rel)))
        noise_std = 0.0
        if self.snr_db is not None:
            noise_std = los_gain / np.sqrt(2.0 * 10 ** (self.snr_db / 10.0))
        seed = int(np.random.SeedSequence([int(self.seed), int(trp.trp_id)]).generate_state(1)[0])
        return ChannelModel(tuple(paths), noise_std, seed)

    def receive(self, trp, srs_ie):
        cfg = srs_ie.config
        seq = generate_srs_sequence(cfg, srs_ie.sequence_root)
        return apply_channel(map_to_grid(seq, cfg), cfg, self.channel_for(trp)), seq
