#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
诊断渲染: 生成帧、每个 DMM 块的偏移着色图与掩码灰度图，以及查询像素的 K 个采样位置.

输出目录布局:
    <out>/frame_01.ppm ...              生成帧
    <out>/target_01.ppm ...             真值帧
    <out>/offsets_f01_l0_forward.ppm    偏移（按 tap 平均）着色
    <out>/mask_f01_l0_forward.ppm       掩码（按 tap 平均）灰度
    <out>/overlay_f01_l0_forward.ppm    放大 4 倍的帧上标出采样位置
    <out>/sampling_points.csv           frame, level, branch, tap, x, y
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from PIL import Image, ImageDraw

from .autograd.tensor import no_grad
from .core.errors import ConfigError, DataIOError
from .data.dataset import SpriteDataset, stack_windows
from .data.image_io import save_ppm, to_uint8
from .ops.dmm import tap_offsets
from .ops.sampling import flow_to_color

PathLike = Union[str, Path]

OVERLAY_SCALE = 4
POINTS_HEADER = ("frame", "level", "branch", "tap", "x", "y")
MARK_RADIUS = 2


@dataclass
class RenderResult:
    directory: Path
    frames: int
    blocks: int
    points: int
    files: List[Path] = field(default_factory=list)


def level_pixel(pixel: Sequence[int], resolution: int, size: int) -> Tuple[int, int]:
    """把画布像素 (x, y) 映射到边长为 size 的特征层像素."""
    x, y = pixel
    scale = size / resolution
    return (min(int((x + 0.5) * scale), size - 1), min(int((y + 0.5) * scale), size - 1))


def sampling_positions(offsets: np.ndarray, pixel: Tuple[int, int], kernel: int = 3) -> np.ndarray:
    """
    特征层像素 pixel 处 K 个采样位置 p + p_k + Δp_k.

    Args:
        offsets: [2K, h, w]，每个 tap 依次为 (x, y)
        pixel: 特征层坐标 (x, y)

    Returns:
        np.ndarray: [K, 2]，特征层坐标 (x, y)
    """
    taps = tap_offsets(kernel, kernel)
    k = taps.shape[0]
    x, y = pixel
    delta = offsets.reshape(k, 2, *offsets.shape[1:])[:, :, y, x]
    return np.array([x, y], dtype=np.float64) + taps + delta


def to_canvas(points: np.ndarray, resolution: int, size: int) -> np.ndarray:
    """特征层坐标转换为画布像素坐标."""
    return (points + 0.5) * resolution / size - 0.5


def _upscale(image: np.ndarray, resolution: int) -> Image.Image:
    return Image.fromarray(to_uint8(image)).resize((resolution, resolution), Image.NEAREST)


def draw_overlay(frame: np.ndarray, points: np.ndarray, pixel: Sequence[int]) -> Image.Image:
    """在放大后的帧上画出采样位置（红点）与查询像素（绿色十字）."""
    base = Image.fromarray(to_uint8(frame))
    width, height = base.size
    canvas = base.resize((width * OVERLAY_SCALE, height * OVERLAY_SCALE), Image.NEAREST)
    draw = ImageDraw.Draw(canvas)
    for x, y in points:
        cx, cy = (x + 0.5) * OVERLAY_SCALE, (y + 0.5) * OVERLAY_SCALE
        draw.ellipse((cx - MARK_RADIUS, cy - MARK_RADIUS, cx + MARK_RADIUS, cy + MARK_RADIUS), fill=(255, 0, 0))
    qx, qy = (pixel[0] + 0.5) * OVERLAY_SCALE, (pixel[1] + 0.5) * OVERLAY_SCALE
    draw.line((qx - 4, qy, qx + 4, qy), fill=(0, 200, 0))
    draw.line((qx, qy - 4, qx, qy + 4), fill=(0, 200, 0))
    return canvas


def _save(image: Image.Image, path: Path, files: List[Path]) -> None:
    try:
        image.save(path, format="PPM")
    except OSError as e:
        raise DataIOError(f"无法写入图像 {path}: {e}")
    files.append(path)


def render_sequence(
    generator,
    dataset: SpriteDataset,
    index: int,
    output_dir: PathLike,
    start: int = 0,
    pixel: Sequence[int] = (32, 32),
    progress=None,
) -> RenderResult:
    """
    对测试序列 index 的 [start, start+M) 窗口运行生成器并写出诊断图.

    Raises:
        ConfigError: 序列号或窗口超出范围
    """
    arch = generator.arch
    window, res = arch.window, arch.resolution
    if not 0 <= index < len(dataset):
        raise ConfigError(f"未知的序列号 {index}，{dataset.split} 划分共 {len(dataset)} 条")
    sequence = dataset.load(index)
    if start < 0 or start + window > sequence.length:
        raise ConfigError(f"窗口 [{start}, {start + window}) 超出序列长度 {sequence.length}")
    if len(pixel) != 2 or not all(0 <= c < res for c in pixel):
        raise ConfigError(f"查询像素 {tuple(pixel)} 不在 {res}x{res} 画布内")

    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataIOError(f"无法创建输出目录 {out}: {e}")

    batch = stack_windows([sequence.window(start, window)], [(index, start)])
    batch = batch.cast(generator.parameters()[0].dtype)
    diagnostics: List[List[Dict]] = []
    with no_grad():
        frames = generator.generate(
            batch.source, batch.source_pose, batch.poses, batch.flows, diagnostics
        ).data[0]

    stage = "渲染"
    if progress is not None:
        progress.start_stage(stage, f"序列 {index} 帧 {start + 1}..{start + window}", total=window)
    files: List[Path] = []
    rows: List[Tuple] = []
    blocks = 0
    for i, frame_diag in enumerate(diagnostics):
        tag = f"{i + 1:02d}"
        for name, image in (("frame", frames[i]), ("target", batch.frames[0, i])):
            path = out / f"{name}_{tag}.ppm"
            save_ppm(path, image)
            files.append(path)
        for block in frame_diag:
            offsets = block["offsets"]
            if offsets is None:
                continue
            blocks += 1
            level, branch = block["level"], block["branch"]
            size = offsets.shape[-1]
            suffix = f"f{tag}_l{level}_{branch}"
            taps = offsets[0].reshape(-1, 2, size, size)
            color = flow_to_color(taps.mean(axis=0)).transpose(2, 0, 1)
            _save(_upscale(color, res), out / f"offsets_{suffix}.ppm", files)
            if block["mask"] is not None:
                _save(_upscale(block["mask"][0].mean(axis=0), res), out / f"mask_{suffix}.ppm", files)
            points = to_canvas(
                sampling_positions(offsets[0], level_pixel(pixel, res, size), arch.kernel), res, size
            )
            _save(draw_overlay(frames[i], points, pixel), out / f"overlay_{suffix}.ppm", files)
            rows.extend(
                (i + 1, level, branch, k, f"{x:.6f}", f"{y:.6f}") for k, (x, y) in enumerate(points)
            )
        if progress is not None:
            progress.update_stage(stage, i + 1, f"帧 {start + i + 1}", absolute=True)

    points_csv = out / "sampling_points.csv"
    try:
        with open(points_csv, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(POINTS_HEADER)
            writer.writerows(rows)
    except OSError as e:
        raise DataIOError(f"无法写入 {points_csv}: {e}")
    files.append(points_csv)
    if progress is not None:
        progress.complete_stage(stage)
    return RenderResult(out, len(diagnostics), blocks, len(rows), files)
