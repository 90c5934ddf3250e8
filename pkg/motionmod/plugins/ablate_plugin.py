#!/usr/bin/env python
# -*- coding: utf-8 -*-

from motionmod.ablation import ABLATION_HEADER, run_ablation
from motionmod.core.event_bus import EventBus
from motionmod.core.events import RUN_COMMAND
from motionmod.core.plugin import BasePlugin


class AblatePlugin(BasePlugin):
    name = "ablate"
    priority = 50

    def register(self, bus: EventBus):
        bus.subscribe(RUN_COMMAND, self.run, priority=self.priority)

    def run(self, ctx):
        if not self.handles(self.name):
            return
        if ctx.run_config.flags().active() and ctx.progress:
            ctx.progress.warning("ablate 会逐个设置消融开关，命令行上的开关被忽略")
        result = run_ablation(ctx.run_config, ctx.output_dir, ctx.progress)
        ctx.results["消融结果"] = result.csv_path
        if ctx.progress:
            rows = [[variant] + [values[k] for k in ABLATION_HEADER[1:]] for variant, values in result.rows.items()]
            ctx.progress.show_table("消融实验", ABLATION_HEADER, rows)
