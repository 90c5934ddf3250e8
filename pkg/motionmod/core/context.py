#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
运行上下文：贯穿生命周期的共享状态与依赖。
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple


class RunContext:
    def __init__(self, args: Any):
        self.args = args
        self.command: str = getattr(args, "command", "") or ""

        # 运行期组件（由插件填充）
        self.progress = None
        self.file_ops = None
        self.config = None  # ConfigManager
        self.run_config = None  # RunConfig

        # 目录
        self.output_dir: Optional[Path] = None
        self.temp_dirs: List[Path] = []

        # 子命令产出，供汇总插件展示
        self.results: Dict[str, Any] = {}

        # 其他
        self.errors: List[Tuple[str, BaseException]] = []
        self.state: Dict[str, Any] = {}
        self.exit_code: int = 0
