#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
PPM（P6, 8 位）图像读写.
"""

from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from ..core.errors import ContractError, DataIOError

PathLike = Union[str, Path]


def to_uint8(image: np.ndarray) -> np.ndarray:
    """[3,H,W] 或 [H,W,3]/[H,W] 的 [0,1] 浮点图转为 [H,W,3] uint8."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3 and image.shape[0] == 3:
        # 首轴为 3 时一律按 CHW 处理
        image = image.transpose(1, 2, 0)
    if image.ndim == 2:
        image = np.repeat(image[..., None], 3, axis=2)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ContractError(f"无法保存形状为 {image.shape} 的图像")
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_ppm(path: PathLike, image: np.ndarray) -> None:
    """保存为二进制 PPM；输入为 [3,H,W]（CHW）、[H,W,3] 或灰度 [H,W]."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(to_uint8(image)).save(path, format="PPM")
    except OSError as e:
        raise DataIOError(f"无法写入图像 {path}: {e}")


def load_ppm(path: PathLike) -> np.ndarray:
    """读取 PPM，返回 [3,H,W] 的 [0,1] float64."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.format != "PPM":
                raise DataIOError(f"{path} 不是 PPM 文件（{img.format}）")
            array = np.asarray(img.convert("RGB"), dtype=np.float64)
    except OSError as e:
        raise DataIOError(f"无法读取图像 {path}: {e}")
    return array.transpose(2, 0, 1) / 255.0
