#!/usr/bin/env python
# -*- coding: utf-8 -*-

from pathlib import Path

from motionmod.autograd.random import RngStream
from motionmod.core.event_bus import EventBus
from motionmod.core.events import RUN_COMMAND
from motionmod.core.plugin import BasePlugin
from motionmod.data.dataset import SpriteDataset
from motionmod.metrics.evaluate import BASELINES, STRATA, GeneratorModel, evaluate_run
from motionmod.models.features import FeatureExtractor
from motionmod.trainer import load_generator


class EvalPlugin(BasePlugin):
    name = "eval"
    priority = 50

    def register(self, bus: EventBus):
        bus.subscribe(RUN_COMMAND, self.run, priority=self.priority)

    def _model(self, ctx):
        baseline = getattr(ctx.args, "baseline", None)
        if baseline:
            return BASELINES[baseline](), f"metrics_{baseline}.csv"
        checkpoint = getattr(ctx.args, "checkpoint", None) or ctx.output_dir / "model.dmmt"
        generator, iteration = load_generator(ctx.run_config, checkpoint)
        if ctx.progress:
            ctx.progress.info(f"已加载 {checkpoint}（第 {iteration} 次迭代）")
        return GeneratorModel(generator, ctx.run_config.window), "metrics.csv"

    def run(self, ctx):
        if not self.handles(self.name):
            return
        config = ctx.run_config
        split = getattr(ctx.args, "split", "test") or "test"
        dataset = SpriteDataset(config.dataset, split)
        model, filename = self._model(ctx)
        report = evaluate_run(
            model, dataset, FeatureExtractor(config.seed, config.leaky_slope), RngStream(config.seed, "eval"),
            repetitions=config.eval_repetitions,
            clips_per_sequence=config.eval_clips_per_sequence,
            clip_length=config.temporal_clip,
            progress=ctx.progress,
            max_workers=ctx.state.get("workers"),
        )
        if report.degenerate and ctx.progress:
            ctx.progress.warning("ffd 片段数少于特征维度 + 1，协方差已加收缩项")
        if split != "test":
            filename = filename.replace(".csv", f"_{split}.csv")
        ctx.results["指标"] = report.write_csv(Path(ctx.output_dir) / filename)
        if ctx.progress:
            rows = [
                [s, report.counts.get(s, 0), report.aggregates[s]["l1"], report.aggregates[s]["psnr"],
                 report.aggregates[s]["ssim"]]
                for s in STRATA
            ]
            ctx.progress.show_table(f"{model.label} @ {split}", ("分层", "帧数", "l1", "psnr", "ssim"), rows)
            ctx.progress.success(f"ffd = {report.ffd:.6g} ± {report.ffd_std:.3g}")
