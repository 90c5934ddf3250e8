#!/usr/bin/env python
# -*- coding: utf-8 -*-

from motionmod.core.event_bus import EventBus
from motionmod.core.events import ON_EXIT
from motionmod.core.plugin import BasePlugin


class CleanupPlugin(BasePlugin):
    name = "cleanup"
    priority = 995

    def register(self, bus: EventBus):
        bus.subscribe(ON_EXIT, self.on_exit, priority=self.priority)

    def on_exit(self, ctx):
        # 中断后残留的暂存目录
        if not ctx.file_ops:
            return
        for path in ctx.temp_dirs:
            if path.exists():
                ctx.file_ops.cleanup_temp_dir(path)
