#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
插件基类与插件管理：提供统一的注册机制，将处理器绑定到事件总线。
"""

from typing import List

from .event_bus import EventBus


class BasePlugin:
    name: str = "base"
    priority: int = 100

    def __init__(self, context):
        self.context = context

    def register(self, bus: EventBus):
        """子类实现：在此方法中将自身的各事件处理器订阅到总线。"""
        raise NotImplementedError

    def handles(self, command: str) -> bool:
        return getattr(self.context.args, "command", None) == command


class PluginManager:
    """加载并注册内置插件."""

    def __init__(self, context):
        self.context = context

    def load_builtin_plugins(self) -> List[BasePlugin]:
        # 延迟导入避免循环依赖
        from motionmod.plugins.ablate_plugin import AblatePlugin
        from motionmod.plugins.cleanup_plugin import CleanupPlugin
        from motionmod.plugins.config_plugin import ConfigPlugin
        from motionmod.plugins.eval_plugin import EvalPlugin
        from motionmod.plugins.gen_data_plugin import GenDataPlugin
        from motionmod.plugins.gradcheck_plugin import GradcheckPlugin
        from motionmod.plugins.prepare_plugin import PreparePlugin
        from motionmod.plugins.progress_plugin import ProgressPlugin
        from motionmod.plugins.render_plugin import RenderPlugin
        from motionmod.plugins.summary_plugin import SummaryPlugin
        from motionmod.plugins.train_plugin import TrainPlugin

        return [
            ProgressPlugin(self.context),
            ConfigPlugin(self.context),
            PreparePlugin(self.context),
            GenDataPlugin(self.context),
            TrainPlugin(self.context),
            EvalPlugin(self.context),
            GradcheckPlugin(self.context),
            RenderPlugin(self.context),
            AblatePlugin(self.context),
            SummaryPlugin(self.context),
            CleanupPlugin(self.context),
        ]

    def register_plugins(self, bus: EventBus, plugins: List[BasePlugin]):
        for p in plugins:
            p.register(bus)
