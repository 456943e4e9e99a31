"""Uplink TDoA positioning for 5G NR, from SRS synthesis to a location fix."""
from .channel import SPEED_OF_LIGHT, ChannelModel, Path, Position3D, apply_channel
from .estimator import (
    SrsIndicationReport,
    ToaMeasurement,
    dequantize_ul_rtoa,
    estimate_toa,
    quantize_ul_rtoa,
)
from .locator import PositionEstimate, TdoaSet, locate, ls_position, nlls_refine, solve_ground_truth
from .signal import SrsConfig, generate_srs_sequence, map_to_grid

__version__ = "0.1.0"
