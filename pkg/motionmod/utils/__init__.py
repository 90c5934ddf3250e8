"""
工具模块 - 进度输出、线程池、文件操作与配置指纹
"""

from .file_ops import FileOperations
from .fingerprint import calculate_config_hash
from .progress import ProgressManager
from .worker_pool import WorkerPool, resolve_worker_count

__all__ = [
    "FileOperations",
    "calculate_config_hash",
    "ProgressManager",
    "WorkerPool",
    "resolve_worker_count",
]
