#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
进度与控制台输出 统一的阶段进度、提示与结果表格.
"""

import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from rich.console import Console
from rich.panel import Panel
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    ProgressColumn,
    SpinnerColumn,
    TaskID,
    TextColumn,
)
from rich.table import Table
from rich.text import Text


class StageClockColumn(ProgressColumn):
    """
    阶段用时与迭代速率.
    """

    def render(self, task):
        elapsed = task.finished_time if task.finished else task.elapsed
        if elapsed is None:
            return Text("--", style="dim")
        text = Text(format_duration(elapsed), style="green" if task.finished else "yellow")
        if not task.finished and task.speed:
            text.append(f" {task.speed:.1f} it/s", style="dim")
        return text


def format_duration(duration: float) -> str:
    if duration < 1:
        return f"{duration * 1000:.0f}ms"
    if duration < 60:
        return f"{duration:.1f}s"
    minutes, seconds = divmod(duration, 60)
    return f"{int(minutes)}m{seconds:04.1f}s"


def describe_artifact(path: Path) -> str:
    """产物摘要：目录给出文件数，文件给出大小."""
    if path.is_dir():
        return f"{sum(1 for p in path.rglob('*') if p.is_file())} 个文件"
    size = path.stat().st_size
    return f"{size / 1024:.1f} KB" if size >= 1024 else f"{size} B"


class ProgressManager:
    """
    统一的进度管理器.

    Args:
        verbose: 逐行输出代替进度条，并显示 info
        quiet: 不显示 info/success 与进度条
        console: 自定义 rich Console（测试时可传入录制用 Console）
    """

    def __init__(self, verbose: bool = False, quiet: bool = False, console: Optional[Console] = None):
        self.console = console or Console()
        self.verbose = verbose and not quiet
        self.quiet = quiet
        self.current_stage = ""
        self._live = False
        self.progress = Progress(
            SpinnerColumn(style="cyan"),
            TextColumn("{task.description}"),
            BarColumn(bar_width=None, complete_style="cyan", finished_style="green"),
            MofNCompleteColumn(),
            StageClockColumn(),
            console=self.console,
            expand=True,
            disable=self.quiet,
        )
        self.tasks: Dict[str, TaskID] = {}
        self._line_started: Dict[str, float] = {}

    @property
    def _bars(self) -> bool:
        return not (self.verbose or self.quiet)

    def start(self, command: str = ""):
        """
        启动进度显示.
        """
        if self._bars:
            self.progress.start()
            self._live = True
        if not self.quiet:
            title = Text("🎞️  motionmod", style="bold cyan")
            title.append("  可变形运动调制视频生成", style="cyan")
            self.console.print(Panel(title, subtitle=f"命令: {command}" if command else None, border_style="cyan"))

    def stop(self):
        if self._live:
            self.progress.stop()
            self._live = False

    def start_stage(self, stage_name: str, description: str = "", total: int = 100) -> Optional[TaskID]:
        """开始新的阶段.

        Args:
            stage_name: 阶段名称，例如 train、eval
            description: 附加说明，显示在名称之后
            total: 进度总量（迭代数、样本数等）

        Returns:
            进度条任务 ID，逐行或静默模式下为 None
        """
        self.current_stage = stage_name
        label = f"{stage_name}: {description}" if description else stage_name
        if self.verbose:
            self._line_started[stage_name] = time.perf_counter()
            self.console.print(f"\n▶ {label}  (共 {total})")
            return None
        if not self._bars:
            return None
        task_id = self.progress.add_task(label, total=max(total, 1))
        self.tasks[stage_name] = task_id
        return task_id

    def update_stage(self, stage_name: str, advance: int = 1, description: Optional[str] = None,
                     absolute: bool = False):
        """推进阶段；absolute 为 True 时 advance 视为已完成总量."""
        if self.verbose:
            if description:
                self.console.print(f"   · {description}")
            return
        task_id = self.tasks.get(stage_name)
        if task_id is None:
            return
        if absolute:
            self.progress.update(task_id, completed=advance)
        else:
            self.progress.advance(task_id, advance)
        if description:
            self.progress.update(task_id, description=f"{stage_name}: {description}")

    def complete_stage(self, stage_name: str):
        if self.verbose:
            began = self._line_started.pop(stage_name, None)
            took = "" if began is None else f" ({format_duration(time.perf_counter() - began)})"
            self.console.print(f"[green]✔ {stage_name}{took}[/green]")
            return
        task_id = self.tasks.get(stage_name)
        if task_id is not None:
            task = self.progress.tasks[self.progress.task_ids.index(task_id)]
            self.progress.update(task_id, completed=task.total)

    def on_error(self, error: Exception, stage: str, details: str = ""):
        """显示错误面板与对应的处理提示.

        Args:
            error: 异常对象
            stage: 出错时所处的事件或阶段
            details: 附加信息，例如配置校验的全部问题
        """
        self.stop()
        body = Text.assemble(
            ("阶段: ", "bold"), (f"{stage}\n", "red"),
            ("原因: ", "bold"), (str(error), ""),
        )
        if details:
            body.append(f"\n{details}")
        self.console.print(Panel(body, title=f"[red]{type(error).__name__}[/red]", border_style="red"))
        hints = self._hints_for(error)
        if hints:
            self.console.print(Panel("\n".join(f"• {h}" for h in hints), title="[yellow]提示[/yellow]",
                                     border_style="yellow"))

    @staticmethod
    def _hints_for(error: Exception) -> List[str]:
        from ..core.errors import (
            CheckpointMismatchError,
            ConfigError,
            DataIOError,
            GradcheckFailure,
            NumericalError,
        )

        if isinstance(error, CheckpointMismatchError):
            return ["使用与训练时相同的消融开关和结构参数", "或重新训练生成新的检查点"]
        if isinstance(error, ConfigError):
            return ["检查配置文件中的键名与取值（未知键会被拒绝）", "window 必须为偶数"]
        if isinstance(error, GradcheckFailure):
            return ["检查报告中相对误差最大的运算的 VJP 实现"]
        if isinstance(error, NumericalError):
            hints = ["尝试降低学习率 lr"]
            if getattr(error, "iteration", -1) >= 0:
                hints.append(f"训练在第 {error.iteration} 次迭代发散")
            return hints
        if isinstance(error, (DataIOError, OSError)):
            return ["确认数据集已通过 gen-data 生成", "检查路径是否存在以及读写权限"]
        return []

    def show_table(self, title: str, columns: Sequence[str], rows: Sequence[Sequence[Any]]):
        """打印结果表格，首列为行名."""
        self.stop()
        table = Table(title=title, header_style="bold cyan")
        for i, column in enumerate(columns):
            table.add_column(str(column), style="bold" if i == 0 else None, justify="left" if i == 0 else "right")
        for row in rows:
            table.add_row(*(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
        self.console.print(table)

    def show_success(self, output_info: Dict[str, Any]):
        """列出本次运行写出的产物."""
        self.stop()
        if self.quiet:
            return
        table = Table(title="运行完成", header_style="bold green")
        for column in ("产物", "路径", "内容"):
            table.add_column(column)
        for name, path in output_info.items():
            if not path:
                continue
            path = Path(path)
            table.add_row(name, str(path), describe_artifact(path) if path.exists() else "缺失")
        self.console.print(table)

    def info(self, message: str):
        if self.verbose:
            self.console.print(f"[dim]{message}[/dim]")

    def warning(self, message: str):
        self.console.print(f"[yellow]⚠ {message}[/yellow]")

    def success(self, message: str):
        if not self.quiet:
            self.console.print(f"[green]✔ {message}[/green]")
