#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
消融实验: 在相同种子下训练并评估完整模型与各消融变体，每个变体输出一行.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .autograd.random import RngStream
from .core.config import RunConfig
from .core.errors import ConfigError, DataIOError
from .data.dataset import SpriteDataset
from .metrics.evaluate import GeneratorModel, MetricReport, evaluate_run, format_value
from .models.features import FeatureExtractor
from .trainer import Trainer

PathLike = Union[str, Path]

BASE_VARIANTS: Tuple[Tuple[str, str], ...] = (
    ("full", ""),
    ("no_dmm", "no_dmm"),
    ("no_dcn", "no_dcn"),
    ("no_style", "no_style"),
    ("no_mask", "no_mask"),
    ("no_forward", "no_forward"),
    ("no_backward", "no_backward"),
)
EXTENDED_VARIANTS: Tuple[Tuple[str, str], ...] = (
    ("no_concat", "no_concat"),
    ("no_structural_recurrence", "no_structural_recurrence"),
)
ABLATION_HEADER = ("variant", "l1", "psnr", "ssim", "ffd", "ffd_std", "l1_dropped", "l1_clean")


def ablation_variants(extended: bool = False) -> List[Tuple[str, str]]:
    return list(BASE_VARIANTS + (EXTENDED_VARIANTS if extended else ()))


def variant_config(base: RunConfig, flag: str, seed: int, output_dir: Path) -> RunConfig:
    """以 base 为起点: 关闭全部消融开关，只打开 flag."""
    flags = {name: False for name in base.flags().names()}
    if flag:
        flags[flag] = True
    return base.replace(seed=seed, output_dir=str(output_dir), **flags)


def report_row(report: MetricReport) -> Dict[str, float]:
    agg = report.aggregates
    return {
        "l1": agg["all"]["l1"],
        "psnr": agg["all"]["psnr"],
        "ssim": agg["all"]["ssim"],
        "ffd": report.ffd,
        "ffd_std": report.ffd_std,
        "l1_dropped": agg["dropped"]["l1"],
        "l1_clean": agg["clean"]["l1"],
    }


def _mean(values: List[float]) -> float:
    finite = [v for v in values if not math.isnan(v)]
    return float(np.mean(finite)) if finite else math.nan


@dataclass
class AblationResult:
    csv_path: Path
    rows: Dict[str, Dict[str, float]] = field(default_factory=dict)


def run_ablation(
    config: RunConfig, output_dir: PathLike, progress=None, variants: Optional[Sequence[str]] = None
) -> AblationResult:
    """
    对每个变体、每个种子训练一次并在测试集上评估，按种子取平均.

    Args:
        config: 基础配置；其中的消融开关被忽略
        output_dir: 各变体的检查点与汇总 CSV 写在这里
        variants: 只运行这些变体（按名称），默认运行全部

    Returns:
        AblationResult: 汇总 CSV 路径与每个变体的指标
    """
    selected = ablation_variants(config.ablate_extended)
    if variants is not None:
        unknown = sorted(set(variants) - {name for name, _ in selected})
        if unknown:
            raise ConfigError(f"未知的消融变体: {', '.join(unknown)}")
        selected = [(name, flag) for name, flag in selected if name in variants]
    output_dir = Path(output_dir)
    train = SpriteDataset(config.dataset, "train")
    test = SpriteDataset(config.dataset, "test")
    if len(train) == 0 or len(test) == 0:
        raise DataIOError(f"{config.dataset} 的训练或测试划分为空，无法进行消融实验")
    # ffd 特征提取器在所有变体与种子之间保持一致
    extractor = FeatureExtractor(config.seed, config.leaky_slope)

    rows: Dict[str, Dict[str, float]] = {}
    for variant, flag in selected:
        per_seed: List[Dict[str, float]] = []
        for offset in range(config.ablate_seeds):
            seed = config.seed + offset
            run_dir = output_dir / variant / f"seed_{seed}"
            run_config = variant_config(config, flag, seed, run_dir)
            if progress is not None:
                progress.info(f"消融变体 {variant}（种子 {seed}）")
            trainer = Trainer(run_config, progress)
            trainer.fit(train, run_dir)
            report = evaluate_run(
                GeneratorModel(trainer.generator, run_config.window), test, extractor,
                RngStream(seed, "eval"),
                repetitions=run_config.eval_repetitions,
                clips_per_sequence=run_config.eval_clips_per_sequence,
                clip_length=run_config.temporal_clip,
                progress=progress,
            )
            report.write_csv(run_dir / "metrics.csv")
            per_seed.append(report_row(report))
        rows[variant] = {key: _mean([r[key] for r in per_seed]) for key in ABLATION_HEADER[1:]}

    csv_path = output_dir / "ablation.csv"
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        with open(csv_path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            handle.write(f"# seeds={config.ablate_seeds} base_seed={config.seed} iterations={config.iterations}\n")
            writer.writerow(ABLATION_HEADER)
            for variant, values in rows.items():
                writer.writerow([variant] + [format_value(values[key]) for key in ABLATION_HEADER[1:]])
    except OSError as e:
        raise DataIOError(f"无法写入 {csv_path}: {e}")
    return AblationResult(csv_path, rows)
