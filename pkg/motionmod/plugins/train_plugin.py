#!/usr/bin/env python
# -*- coding: utf-8 -*-

from motionmod.core.event_bus import EventBus
from motionmod.core.events import RUN_COMMAND
from motionmod.core.plugin import BasePlugin
from motionmod.data.dataset import SpriteDataset
from motionmod.losses import TERM_NAMES
from motionmod.trainer import Trainer


class TrainPlugin(BasePlugin):
    name = "train"
    priority = 50

    def register(self, bus: EventBus):
        bus.subscribe(RUN_COMMAND, self.run, priority=self.priority)

    def run(self, ctx):
        if not self.handles(self.name):
            return
        dataset = SpriteDataset(ctx.run_config.dataset, "train")
        ctx.results["配置"] = ctx.config.save_merged_config(ctx.output_dir / "config.cfg")
        result = Trainer(ctx.run_config, ctx.progress).fit(dataset, ctx.output_dir)
        ctx.results["检查点"] = result.checkpoint
        ctx.results["损失记录"] = result.loss_csv
        if ctx.progress and result.last_losses:
            names = TERM_NAMES + ("total",)
            ctx.progress.show_table(
                f"第 {result.iterations} 次迭代的加权损失",
                names,
                [[result.last_losses[n] for n in names]],
            )
