"""
可变形采样、位移场变形与 DMM 块
"""

from .dmm import DMMBlock, DMMOutput, deform_conv2d, modulate_demodulate, regress_offset_mask, tap_offsets
from .sampling import base_grid, bilinear_sample, flow_to_color, warp

__all__ = [
    "DMMBlock",
    "DMMOutput",
    "deform_conv2d",
    "modulate_demodulate",
    "regress_offset_mask",
    "tap_offsets",
    "base_grid",
    "bilinear_sample",
    "flow_to_color",
    "warp",
]
