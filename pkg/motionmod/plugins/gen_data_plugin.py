#!/usr/bin/env python
# -*- coding: utf-8 -*-

from motionmod.core.event_bus import EventBus
from motionmod.core.events import RUN_COMMAND
from motionmod.core.plugin import BasePlugin
from motionmod.data.dataset import generate_dataset


class GenDataPlugin(BasePlugin):
    name = "gen-data"
    priority = 50

    def register(self, bus: EventBus):
        bus.subscribe(RUN_COMMAND, self.run, priority=self.priority)

    def run(self, ctx):
        if not self.handles(self.name):
            return
        config = ctx.run_config
        target = generate_dataset(config, ctx.progress)
        ctx.results["数据集"] = target
        if ctx.progress:
            ctx.progress.success(f"已生成 {config.n_train} 条训练序列和 {config.n_test} 条测试序列")
