"""
核心模块 - 配置、异常与插件化生命周期
"""

from .config import ConfigManager, RunConfig
from .context import RunContext
from .engine import Engine
from .errors import (
    CheckpointMismatchError,
    ConfigError,
    ContractError,
    DataIOError,
    GradcheckFailure,
    MotionModError,
    NumericalError,
    exit_code_for,
)
from .plugin import BasePlugin, PluginManager

__all__ = [
    "ConfigManager",
    "RunConfig",
    "RunContext",
    "Engine",
    "CheckpointMismatchError",
    "ConfigError",
    "ContractError",
    "DataIOError",
    "GradcheckFailure",
    "MotionModError",
    "NumericalError",
    "exit_code_for",
    "BasePlugin",
    "PluginManager",
]
