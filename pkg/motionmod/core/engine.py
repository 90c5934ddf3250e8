#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
运行引擎：按固定顺序触发生命周期事件，并把失败折算成退出码.
"""

from .errors import exit_code_for
from .event_bus import EventBus
from .events import (
    LOAD_CONFIG,
    ON_ERROR,
    ON_EXIT,
    ON_START,
    ON_SUCCESS,
    PREPARE,
    RUN_COMMAND,
)

PIPELINE = (ON_START, LOAD_CONFIG, PREPARE, RUN_COMMAND)


class Engine:
    def __init__(self, context, plugin_manager):
        self.context = context
        self.plugin_manager = plugin_manager
        self.bus = EventBus()

    def setup(self):
        plugins = self.plugin_manager.load_builtin_plugins()
        self.plugin_manager.register_plugins(self.bus, plugins)

    def run(self) -> int:
        """
        ON_START → LOAD_CONFIG → PREPARE → RUN_COMMAND → ON_SUCCESS，最后总是 ON_EXIT.

        任一事件失败即跳到 ON_ERROR，不再触发后续事件.
        """
        ctx = self.context
        try:
            failed = not self._run_pipeline()
        except KeyboardInterrupt:
            ctx.errors.append((ctx.command or "run", KeyboardInterrupt("用户中断")))
            failed = True

        if failed:
            _, error = ctx.errors[-1]
            ctx.exit_code = exit_code_for(error)
            # 错误处理器自身出错时仍要走到 ON_EXIT
            self.bus.emit(ON_ERROR, ctx)
        self.bus.emit(ON_EXIT, ctx)
        return ctx.exit_code

    def _run_pipeline(self) -> bool:
        ctx = self.context
        for event in PIPELINE:
            if not self.bus.emit(event, ctx):
                return False
        return self.bus.emit(ON_SUCCESS, ctx)
