#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
异常层次：引擎根据异常类型映射退出码.
"""

# 退出码约定
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


class MotionModError(Exception):
    """所有领域异常的基类."""

    exit_code: int = EXIT_USAGE


class ContractError(MotionModError, ValueError):
    """形状或参数契约被违反."""

    exit_code = EXIT_USAGE


class ConfigError(MotionModError):
    """配置解析或校验失败."""

    exit_code = EXIT_USAGE


class CheckpointMismatchError(ConfigError):
    """检查点的架构哈希与当前配置不一致."""


class NumericalError(MotionModError):
    """运算产生 NaN/Inf，或梯度检查未通过."""

    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, op: str = "", iteration: int = -1):
        super().__init__(message)
        self.op = op
        self.iteration = iteration


class GradcheckFailure(NumericalError):
    """有限差分梯度检查失败."""


class DataIOError(MotionModError):
    """数据集、检查点或图像文件读写失败."""

    exit_code = EXIT_IO


class SpriteOutOfBoundsError(ContractError):
    """精灵在某一帧离开画布安全区."""


def exit_code_for(error: BaseException) -> int:
    """根据异常类型返回进程退出码."""
    if isinstance(error, MotionModError):
        return error.exit_code
    if isinstance(error, OSError):
        return EXIT_IO
    return EXIT_USAGE
