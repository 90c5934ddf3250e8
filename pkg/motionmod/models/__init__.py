"""
生成器、判别器与固定特征提取器
"""

from .config import AblationFlags, ArchConfig
from .discriminators import SpatialDiscriminator, TemporalDiscriminator, frames_to_clip
from .features import FeatureExtractor
from .generator import Generator

__all__ = [
    "AblationFlags",
    "ArchConfig",
    "SpatialDiscriminator",
    "TemporalDiscriminator",
    "frames_to_clip",
    "FeatureExtractor",
    "Generator",
]
