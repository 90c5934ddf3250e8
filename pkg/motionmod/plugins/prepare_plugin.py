#!/usr/bin/env python
# -*- coding: utf-8 -*-

from pathlib import Path

from motionmod.autograd.tensor import set_default_dtype
from motionmod.core.event_bus import EventBus
from motionmod.core.events import PREPARE
from motionmod.core.plugin import BasePlugin
from motionmod.utils.file_ops import STAGING_SUFFIX, FileOperations
from motionmod.utils.worker_pool import resolve_worker_count

# 这些命令会写 output_dir
WRITES_OUTPUT = ("train", "eval", "render", "ablate")


class PreparePlugin(BasePlugin):
    name = "prepare"
    priority = 40

    def register(self, bus: EventBus):
        bus.subscribe(PREPARE, self.prepare, priority=self.priority)

    def prepare(self, ctx):
        config = ctx.run_config
        ctx.file_ops = ctx.file_ops or FileOperations()

        # gradcheck 固定使用 f64
        if ctx.command != "gradcheck":
            set_default_dtype(config.precision)

        # DMM_THREADS 非法时在这里就报错，而不是等到第一次并行
        ctx.state["workers"] = resolve_worker_count()

        if ctx.command in WRITES_OUTPUT:
            ctx.output_dir = ctx.file_ops.ensure_dir(config.output_dir)
        if ctx.command == "gen-data":
            target = Path(config.dataset)
            ctx.temp_dirs.append(target.with_name(target.name + STAGING_SUFFIX))

        if ctx.progress:
            ctx.progress.info(f"精度 {config.precision}，工作线程 {ctx.state['workers']}")
