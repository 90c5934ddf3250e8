#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
测试集评估: 逐帧 L1/PSNR/SSIM，按丢点帧分层，再对随机连续片段计算 ffd.
"""

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from ..autograd.random import RngStream
from ..autograd.tensor import no_grad
from ..core.errors import ContractError, DataIOError
from ..data.dataset import SpriteDataset, stack_windows
from ..data.sprites import SpriteSequence
from ..models.features import FeatureExtractor, embeddings_to_clip_features
from ..utils.worker_pool import WorkerPool
from .frechet import frechet_feature_distance
from .image import l1, psnr, ssim

STRATA = ("all", "dropped", "clean")
FRAME_HEADER = ("seq", "frame", "dropped", "l1", "psnr", "ssim")
AGG_HEADER = ("AGG", "l1", "psnr", "ssim", "ffd", "ffd_std")
REPORT_NOTE = "# ffd = Fréchet 特征距离（固定随机特征，非 FVD）；FID 与 LPIPS 依赖预训练网络，未计算"


class SequenceModel(Protocol):
    label: str

    def generate_sequence(self, sequence: SpriteSequence) -> np.ndarray:
        """返回 [L,3,H,W] 的生成帧."""


class GeneratorModel:
    """
    把训练好的生成器按连续 M 帧窗口应用到整条序列.

    长度不能被 M 整除时，最后一个窗口与前一个重叠，重叠帧取后一个窗口的结果.
    """

    label = "generator"

    def __init__(self, generator, window: int):
        if window < 1:
            raise ContractError(f"窗口长度必须为正，实际 {window}")
        self.generator = generator
        self.window = window
        params = generator.parameters()
        self.dtype = params[0].dtype if params else np.float32

    def window_starts(self, length: int) -> List[int]:
        if length < self.window:
            raise ContractError(f"序列长度 {length} 小于窗口 {self.window}")
        starts = list(range(0, length - self.window + 1, self.window))
        if starts[-1] + self.window < length:
            starts.append(length - self.window)
        return starts

    def generate_sequence(self, sequence: SpriteSequence) -> np.ndarray:
        starts = self.window_starts(sequence.length)
        windows = [sequence.window(s, self.window) for s in starts]
        batch = stack_windows(windows, [(0, s) for s in starts]).cast(self.dtype)
        with no_grad():
            out = self.generator.generate(batch.source, batch.source_pose, batch.poses, batch.flows).data
        frames = np.empty(sequence.frames.shape, dtype=np.float64)
        for start, chunk in zip(starts, out):
            frames[start:start + self.window] = chunk
        return frames


class CopySourceModel:
    """每一帧都输出源图."""

    label = "copy"

    def generate_sequence(self, sequence: SpriteSequence) -> np.ndarray:
        return np.repeat(sequence.source[None], sequence.length, axis=0)


class ConstantModel:
    """输出常数灰度图."""

    label = "constant"

    def __init__(self, level: float = 0.5):
        self.level = level

    def generate_sequence(self, sequence: SpriteSequence) -> np.ndarray:
        return np.full(sequence.frames.shape, self.level, dtype=np.float64)


class OracleModel:
    """直接返回真值帧."""

    label = "oracle"

    def generate_sequence(self, sequence: SpriteSequence) -> np.ndarray:
        return np.array(sequence.frames, dtype=np.float64)


BASELINES = {"copy": CopySourceModel, "constant": ConstantModel, "oracle": OracleModel}


@dataclass
class FrameRow:
    seq: int
    frame: int
    dropped: bool
    l1: float
    psnr: float
    ssim: float


@dataclass
class MetricReport:
    """逐帧指标、分层汇总与 ffd."""

    model: str
    split: str
    rows: List[FrameRow] = field(default_factory=list)
    aggregates: Dict[str, Dict[str, float]] = field(default_factory=dict)
    counts: Dict[str, int] = field(default_factory=dict)
    ffd: float = math.nan
    ffd_std: float = math.nan
    degenerate: bool = False

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        buffer.write(f"{REPORT_NOTE}\n")
        counts = " ".join(f"{s}={self.counts.get(s, 0)}" for s in STRATA)
        buffer.write(f"# model={self.model} split={self.split} frames: {counts}\n")
        if self.degenerate:
            buffer.write("# warning: ffd 样本数不足特征维度+1，协方差已收缩\n")
        writer.writerow(FRAME_HEADER)
        for row in self.rows:
            writer.writerow([
                row.seq, row.frame, int(row.dropped), format_value(row.l1),
                format_value(row.psnr), format_value(row.ssim),
            ])
        writer.writerow(AGG_HEADER)
        for stratum in STRATA:
            agg = self.aggregates.get(stratum, {})
            # ffd 只对整体计算；分层行留 nan
            ffd, ffd_std = (self.ffd, self.ffd_std) if stratum == "all" else (math.nan, math.nan)
            writer.writerow([
                stratum,
                format_value(agg.get("l1", math.nan)),
                format_value(agg.get("psnr", math.nan)),
                format_value(agg.get("ssim", math.nan)),
                format_value(ffd),
                format_value(ffd_std),
            ])
        return buffer.getvalue()

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.to_csv(), encoding="utf-8")
        except OSError as e:
            raise DataIOError(f"无法写入指标文件 {path}: {e}")
        return path

    def summary(self) -> Dict[str, float]:
        agg = self.aggregates.get("all", {})
        return {"l1": agg.get("l1", math.nan), "psnr": agg.get("psnr", math.nan),
                "ssim": agg.get("ssim", math.nan), "ffd": self.ffd, "ffd_std": self.ffd_std}


def format_value(value: float) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.8g}"


def aggregate(rows: Sequence[FrameRow]) -> Dict[str, float]:
    if not rows:
        return {"l1": math.nan, "psnr": math.nan, "ssim": math.nan}
    return {
        "l1": float(np.mean([r.l1 for r in rows])),
        "psnr": float(np.mean([r.psnr for r in rows])),
        "ssim": float(np.mean([r.ssim for r in rows])),
    }


def _evaluate_sequence(
    model: SequenceModel, dataset: SpriteDataset, extractor: FeatureExtractor, index: int
) -> Tuple[List[FrameRow], np.ndarray, np.ndarray]:
    sequence = dataset.load(index)
    generated = np.asarray(model.generate_sequence(sequence), dtype=np.float64)
    if generated.shape != sequence.frames.shape:
        raise ContractError(f"{model.label} 生成帧形状 {generated.shape} 与真值 {sequence.frames.shape} 不一致")
    dropped = sequence.dropped_frames()
    rows = [
        FrameRow(index, i + 1, bool(dropped[i]), l1(generated[i], sequence.frames[i]),
                 psnr(generated[i], sequence.frames[i]), ssim(generated[i], sequence.frames[i]))
        for i in range(sequence.length)
    ]
    return rows, extractor.frame_embeddings(generated), extractor.frame_embeddings(sequence.frames)


def frechet_over_clips(
    fake: Sequence[np.ndarray],
    real: Sequence[np.ndarray],
    rng: RngStream,
    repetitions: int,
    clips_per_sequence: int,
    clip_length: int,
) -> Tuple[float, float, bool]:
    """
    每次重复为每条序列抽取相同起点的连续片段，计算生成与真值片段特征之间的距离.

    Returns:
        (均值, 标准差, 是否出现协方差退化)
    """
    values = []
    degenerate = False
    for r in range(repetitions):
        stream = rng.child(f"rep{r}")
        fake_clips, real_clips = [], []
        for fake_emb, real_emb in zip(fake, real):
            span = len(real_emb) - clip_length + 1
            if span < 1:
                raise ContractError(f"序列长度 {len(real_emb)} 小于片段长度 {clip_length}")
            for _ in range(clips_per_sequence):
                start = stream.integers(0, span)
                fake_clips.append(fake_emb[start:start + clip_length])
                real_clips.append(real_emb[start:start + clip_length])
        result = frechet_feature_distance(
            embeddings_to_clip_features(np.stack(fake_clips)),
            embeddings_to_clip_features(np.stack(real_clips)),
        )
        values.append(result.value)
        degenerate = degenerate or result.degenerate
    return float(np.mean(values)), float(np.std(values)), degenerate


def evaluate_run(
    model: SequenceModel,
    dataset: SpriteDataset,
    extractor: FeatureExtractor,
    rng: RngStream,
    repetitions: int = 5,
    clips_per_sequence: int = 4,
    clip_length: int = 4,
    progress=None,
    max_workers: Optional[int] = None,
) -> MetricReport:
    """
    在一个数据划分上评估模型.

    Args:
        model: 具有 generate_sequence 的模型
        dataset: 数据划分
        extractor: 片段特征提取器
        rng: ffd 片段抽样随机流
        repetitions: ffd 重复次数

    Returns:
        MetricReport: 评估报告
    """
    if len(dataset) == 0:
        raise DataIOError(f"{dataset.split} 划分为空，无法评估")
    if repetitions < 1 or clips_per_sequence < 1:
        raise ContractError("repetitions 与 clips_per_sequence 必须为正")

    stage = "评估"
    if progress is not None:
        progress.start_stage(stage, f"{model.label} @ {dataset.split}（{len(dataset)} 条序列）", total=len(dataset))
    with WorkerPool(progress, max_workers) as pool:
        results = pool.map(
            lambda k: _evaluate_sequence(model, dataset, extractor, k), range(len(dataset)), stage=stage
        )
    if progress is not None:
        progress.complete_stage(stage)

    rows = [row for seq_rows, _, _ in results for row in seq_rows]
    strata = {
        "all": rows,
        "dropped": [r for r in rows if r.dropped],
        "clean": [r for r in rows if not r.dropped],
    }
    ffd, ffd_std, degenerate = frechet_over_clips(
        [fake for _, fake, _ in results], [real for _, _, real in results],
        rng, repetitions, clips_per_sequence, clip_length,
    )
    return MetricReport(
        model=model.label,
        split=dataset.split,
        rows=rows,
        aggregates={name: aggregate(items) for name, items in strata.items()},
        counts={name: len(items) for name, items in strata.items()},
        ffd=ffd,
        ffd_std=ffd_std,
        degenerate=degenerate,
    )
