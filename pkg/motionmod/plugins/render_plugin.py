#!/usr/bin/env python
# -*- coding: utf-8 -*-

from motionmod.core.event_bus import EventBus
from motionmod.core.events import RUN_COMMAND
from motionmod.core.plugin import BasePlugin
from motionmod.data.dataset import SpriteDataset
from motionmod.render import render_sequence
from motionmod.trainer import load_generator


class RenderPlugin(BasePlugin):
    name = "render"
    priority = 50

    def register(self, bus: EventBus):
        bus.subscribe(RUN_COMMAND, self.run, priority=self.priority)

    def run(self, ctx):
        if not self.handles(self.name):
            return
        config = ctx.run_config
        generator, _ = load_generator(config, ctx.args.checkpoint)
        index = getattr(ctx.args, "seq", 0)
        result = render_sequence(
            generator,
            SpriteDataset(config.dataset, "test"),
            index,
            ctx.output_dir / "render" / f"seq_{index:04d}",
            start=getattr(ctx.args, "start", 0),
            pixel=config.render_pixel,
            progress=ctx.progress,
        )
        ctx.results["渲染目录"] = result.directory
        if ctx.progress:
            ctx.progress.success(f"{result.frames} 帧，{result.blocks} 个 DMM 块诊断，{result.points} 个采样位置")
