#!/usr/bin/env python
# -*- coding: utf-8 -*-

from motionmod.core.config import ConfigManager
from motionmod.core.context import RunContext
from motionmod.core.event_bus import EventBus
from motionmod.core.events import LOAD_CONFIG
from motionmod.core.plugin import BasePlugin
from motionmod.utils.file_ops import FileOperations


class ConfigPlugin(BasePlugin):
    name = "config"
    priority = 20

    def register(self, bus: EventBus):
        bus.subscribe(LOAD_CONFIG, self.load_config, priority=self.priority)

    def load_config(self, ctx: RunContext):
        ctx.file_ops = ctx.file_ops or FileOperations()
        ctx.config = ConfigManager(config_path=getattr(ctx.args, "config", None), args=vars(ctx.args))
        ctx.run_config = ctx.config.config
        if ctx.progress:
            source = ctx.config.config_path or "默认配置"
            ctx.progress.info(f"配置来源: {source}（seed={ctx.run_config.seed}, M={ctx.run_config.window}）")
            if ctx.run_config.flags().active():
                ctx.progress.info(f"消融开关: {ctx.run_config.flags().label()}")
