"""
评估指标
"""

from .evaluate import (
    BASELINES,
    ConstantModel,
    CopySourceModel,
    GeneratorModel,
    MetricReport,
    OracleModel,
    evaluate_run,
)
from .frechet import FrechetResult, frechet_feature_distance
from .image import l1, psnr, ssim

__all__ = [
    "BASELINES",
    "ConstantModel",
    "CopySourceModel",
    "GeneratorModel",
    "MetricReport",
    "OracleModel",
    "evaluate_run",
    "FrechetResult",
    "frechet_feature_distance",
    "l1",
    "psnr",
    "ssim",
]
