#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
对抗训练循环与检查点.

每次迭代: 生成 -> 一步 D_s + D_t 更新（假样本已分离）-> 冻结判别器后一步 G 更新.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .autograd import ops
from .autograd.optim import AdamState, adam_step
from .autograd.random import RngStream
from .autograd.serialize import load_checkpoint, save_checkpoint
from .autograd.tensor import Tape, Tensor, backward
from .core.config import RunConfig
from .core.errors import CheckpointMismatchError, DataIOError, NumericalError
from .data.dataset import Batch, SpriteDataset
from .losses import (
    TERM_NAMES,
    contextual_loss,
    discriminator_loss,
    generator_adv_loss,
    gram_loss,
    l1_loss,
    perceptual_loss,
    total_loss,
)
from .metrics.evaluate import format_value
from .models import ArchConfig, FeatureExtractor, Generator, SpatialDiscriminator, TemporalDiscriminator
from .models.discriminators import frames_to_clip
from .utils.fingerprint import calculate_config_hash
from .utils.worker_pool import WorkerPool

LOSS_HEADER = ("iter",) + TERM_NAMES + ("total",)
ARCH_PREFIX = "meta/arch/"
ITERATION_KEY = "meta/iteration"


def architecture_hash(arch: ArchConfig) -> str:
    return calculate_config_hash(arch.fingerprint_payload())


def checkpoint_entries(modules: Dict[str, object], arch: ArchConfig, iteration: int) -> Dict[str, np.ndarray]:
    entries: Dict[str, np.ndarray] = {}
    for prefix, module in modules.items():
        for name, value in module.state_dict().items():
            entries[f"{prefix}.{name}"] = value
    entries[f"{ARCH_PREFIX}{architecture_hash(arch)}"] = np.zeros(0, dtype=np.float32)
    entries[ITERATION_KEY] = np.array([iteration], dtype=np.float64)
    return entries


def checkpoint_arch_hash(entries: Dict[str, np.ndarray]) -> Optional[str]:
    for name in entries:
        if name.startswith(ARCH_PREFIX):
            return name[len(ARCH_PREFIX):]
    return None


def module_state(entries: Dict[str, np.ndarray], prefix: str) -> Dict[str, np.ndarray]:
    head = f"{prefix}."
    return {name[len(head):]: value for name, value in entries.items() if name.startswith(head)}


def load_generator(config: RunConfig, path) -> Tuple[Generator, int]:
    """
    从检查点恢复生成器；架构哈希与当前配置不一致时拒绝加载.

    Returns:
        (生成器, 检查点迭代数)
    """
    entries = load_checkpoint(path)
    arch = config.arch()
    stored = checkpoint_arch_hash(entries)
    expected = architecture_hash(arch)
    if stored is None:
        raise CheckpointMismatchError(f"{path} 缺少架构哈希，无法确认与当前配置一致")
    if stored != expected:
        raise CheckpointMismatchError(
            f"检查点架构 {stored[:12]} 与当前配置 {expected[:12]}（消融开关 {arch.flags.label()}）不一致"
        )
    generator = Generator(arch, RngStream(config.seed, "init"))
    generator.load_state_dict(module_state(entries, "generator"))
    iteration = int(entries[ITERATION_KEY][0]) if ITERATION_KEY in entries else 0
    return generator, iteration


@dataclass
class TrainResult:
    checkpoint: Path
    loss_csv: Path
    iterations: int
    last_losses: Dict[str, float] = field(default_factory=dict)
    checkpoints: List[Path] = field(default_factory=list)


class Trainer:
    """
    训练器.

    Args:
        config: 运行配置
        progress: 可选的 ProgressManager
    """

    def __init__(self, config: RunConfig, progress=None):
        self.config = config
        self.progress = progress
        self.arch = config.arch()
        init = RngStream(config.seed, "init")
        self.generator = Generator(self.arch, init)
        self.d_spatial = SpatialDiscriminator(init, config.leaky_slope)
        self.d_temporal = TemporalDiscriminator(init, config.leaky_slope)
        self.extractor = FeatureExtractor(config.seed, config.leaky_slope)
        self.weights = config.loss_weights()
        self.g_opt = AdamState(config.lr, config.beta1, config.beta2, config.adam_eps)
        self.d_opt = AdamState(config.lr, config.beta1, config.beta2, config.adam_eps)
        self.batch_rng = RngStream(config.seed, "batches")
        self.clip_rng = RngStream(config.seed, "clips")
        self.iteration = 0

    @property
    def modules(self) -> Dict[str, object]:
        return {"generator": self.generator, "d_spatial": self.d_spatial, "d_temporal": self.d_temporal}

    def _discriminator_inputs(self, batch: Batch, frames) -> Tuple[Tensor, np.ndarray]:
        b, m = batch.frames.shape[:2]
        flat = ops.reshape(frames, (b * m,) + tuple(batch.frames.shape[2:]))
        return flat, np.repeat(batch.source, m, axis=0)

    def discriminator_objective(self, batch: Batch, fake: Tensor, clip_start: int) -> Tensor:
        form = self.config.gan_form
        t = self.arch.temporal_clip
        real_flat, sources = self._discriminator_inputs(batch, batch.frames)
        fake_flat, _ = self._discriminator_inputs(batch, fake)
        spatial = discriminator_loss(
            self.d_spatial(sources, real_flat), self.d_spatial(sources, fake_flat), form
        )
        temporal = discriminator_loss(
            self.d_temporal(frames_to_clip(batch.frames, clip_start, t)),
            self.d_temporal(frames_to_clip(fake, clip_start, t)),
            form,
        )
        return ops.add(spatial, temporal)

    def generator_terms(self, batch: Batch, fake: Tensor, clip_start: int) -> Dict[str, Tensor]:
        form = self.config.gan_form
        fake_flat, sources = self._discriminator_inputs(batch, fake)
        return {
            "adv": generator_adv_loss(self.d_spatial(sources, fake_flat), form),
            "temp": generator_adv_loss(self.d_temporal(frames_to_clip(fake, clip_start, self.arch.temporal_clip)), form),
            "l1": l1_loss(fake, batch.frames),
            "per": perceptual_loss(fake, batch.frames, self.extractor),
            "gram": gram_loss(fake, batch.frames, self.extractor),
            "cx": contextual_loss(
                fake, batch.frames, self.extractor, h=self.config.cx_h, max_samples=self.config.cx_max_samples
            ),
        }

    def train_step(self, batch: Batch) -> Dict[str, float]:
        """一次 D/G 交替更新，返回加权后的各项及总损失."""
        clip_start = self.clip_rng.integers(0, batch.frames.shape[1] - self.arch.temporal_clip + 1)
        g_tape = Tape("generator")
        with g_tape:
            fake = self.generator.generate(batch.source, batch.source_pose, batch.poses, batch.flows)

        d_params = self.d_spatial.parameters() + self.d_temporal.parameters()
        with Tape("discriminator") as d_tape:
            loss_d = self.discriminator_objective(batch, fake.detach(), clip_start)
        adam_step(d_params, backward(loss_d, d_tape, params=d_params), self.d_opt)

        with self.d_spatial.frozen(), self.d_temporal.frozen(), g_tape:
            total, weighted = total_loss(self.generator_terms(batch, fake, clip_start), self.weights)
        g_params = self.generator.parameters()
        adam_step(g_params, backward(total, g_tape, params=g_params), self.g_opt)

        losses = {name: weighted[name].item() for name in TERM_NAMES}
        losses["total"] = total.item()
        losses["d"] = loss_d.item()
        return losses

    def save(self, path) -> Path:
        save_checkpoint(path, checkpoint_entries(self.modules, self.arch, self.iteration))
        return Path(path)

    def fit(self, dataset: SpriteDataset, output_dir) -> TrainResult:
        """
        训练 config.iterations 次迭代，每个 checkpoint_interval 保存一次检查点.

        Raises:
            NumericalError: 任一损失出现 NaN/Inf，携带迭代序号
        """
        config = self.config
        output_dir = Path(output_dir)
        ckpt_dir = output_dir / "checkpoints"
        try:
            ckpt_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DataIOError(f"无法创建输出目录 {ckpt_dir}: {e}")
        loss_csv = output_dir / "train_loss.csv"
        saved: List[Path] = []
        losses: Dict[str, float] = {}

        stage = "训练"
        if self.progress is not None:
            self.progress.start_stage(stage, f"{config.iterations} 次迭代（{self.arch.flags.label()}）", total=config.iterations)
        with open(loss_csv, "w", encoding="utf-8", newline="") as handle, WorkerPool(self.progress) as pool:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(LOSS_HEADER)
            for it in range(1, config.iterations + 1):
                batch = dataset.sample_batch(self.batch_rng, config.batch_size, config.window, pool)
                batch = batch.cast(self.generator.parameters()[0].dtype)
                try:
                    losses = self.train_step(batch)
                except NumericalError as e:
                    raise NumericalError(
                        f"第 {it} 次迭代出现 NaN/Inf（{e.op or '未知运算'}），训练中止", op=e.op, iteration=it
                    ) from e
                if not np.isfinite(losses["total"]):
                    raise NumericalError(f"第 {it} 次迭代总损失为 {losses['total']}，训练中止", iteration=it)
                self.iteration = it
                writer.writerow([it] + [format_value(losses[name]) for name in TERM_NAMES + ("total",)])
                if it % config.checkpoint_interval == 0:
                    saved.append(self.save(ckpt_dir / f"ckpt_{it:06d}.dmmt"))
                if self.progress is not None:
                    self.progress.update_stage(stage, it, f"iter {it}/{config.iterations} total={losses['total']:.4f}", absolute=True)
        final = self.save(output_dir / "model.dmmt")
        if self.progress is not None:
            self.progress.complete_stage(stage)
        return TrainResult(final, loss_csv, self.iteration, losses, saved)
