#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
线程池 按提交顺序合并结果，保证并行执行下输出确定.
"""

import concurrent.futures
import os
from typing import Callable, Iterable, List, Optional, TypeVar

from ..core.errors import ConfigError

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "DMM_THREADS"


def resolve_worker_count(requested: Optional[int] = None) -> int:
    """工作线程数: requested，默认 CPU 核心数 + 1；DMM_THREADS 设置时作为上限.

    Raises:
        ConfigError: DMM_THREADS 不是正整数
    """
    default = max(1, int(requested)) if requested is not None else (os.cpu_count() or 1) + 1
    raw = os.environ.get(THREADS_ENV)
    if raw is not None and raw.strip():
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} 必须是正整数，实际 {raw!r}")
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} 必须是正整数，实际 {raw!r}")
        return min(value, default)
    return default


class WorkerPool:
    """
    工作线程池，必须作为上下文管理器使用.

    Args:
        progress_manager: 进度管理器（可选），用于报告进度
        max_workers: 最大工作线程数
    """

    def __init__(self, progress_manager=None, max_workers: Optional[int] = None):
        self.progress = progress_manager
        self.max_workers = resolve_worker_count(max_workers)
        self._executor = None

    def __enter__(self):
        if self.max_workers > 1:
            self._executor = concurrent.futures.ThreadPoolExecutor(
                max_workers=self.max_workers
            )
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self._executor:
            self._executor.shutdown(wait=True)
            self._executor = None

    def map(
        self,
        fn: Callable[[T], R],
        items: Iterable[T],
        stage: Optional[str] = None,
    ) -> List[R]:
        """对每个元素执行 fn，结果按输入顺序返回；任一任务失败时抛出其异常.

        Args:
            fn: 任务函数
            items: 输入序列
            stage: 进度阶段名，给出时按完成数更新进度
        """
        items = list(items)
        total = len(items)
        if self._executor is None:
            results = []
            for done, item in enumerate(items, start=1):
                results.append(fn(item))
                self._report(stage, done, total)
            return results

        futures = [self._executor.submit(fn, item) for item in items]
        results: List[R] = []
        for done, future in enumerate(futures, start=1):
            results.append(future.result())
            self._report(stage, done, total)
        return results

    def _report(self, stage: Optional[str], done: int, total: int) -> None:
        if self.progress is not None and stage:
            self.progress.update_stage(stage, done, f"{done}/{total}", absolute=True)
