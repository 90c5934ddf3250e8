"""
神经网络层
"""

from .module import Conv2d, Conv3d, Linear, Module, ModuleList, kaiming_std

__all__ = ["Conv2d", "Conv3d", "Linear", "Module", "ModuleList", "kaiming_std"]
