#!/usr/bin/env python
# -*- coding: utf-8 -*-

from motionmod.core.event_bus import EventBus
from motionmod.core.events import RUN_COMMAND
from motionmod.core.plugin import BasePlugin
from motionmod.gradcheck_suite import ensure_passed, result_rows, run_suite


class GradcheckPlugin(BasePlugin):
    name = "gradcheck"
    priority = 50

    def register(self, bus: EventBus):
        bus.subscribe(RUN_COMMAND, self.run, priority=self.priority)

    def run(self, ctx):
        if not self.handles(self.name):
            return
        results = run_suite(
            seed=ctx.run_config.seed,
            names=getattr(ctx.args, "case", None),
            include_negative=getattr(ctx.args, "negative_control", False),
            progress=ctx.progress,
        )
        ctx.state["gradcheck"] = results
        if ctx.progress:
            ctx.progress.show_table(
                "梯度检查（f64，中心差分）", ("用例", "分组", "最大相对误差", "最差输入", "结果"), result_rows(results)
            )
        ensure_passed(results)
