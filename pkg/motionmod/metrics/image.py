#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
逐帧图像指标: L1、PSNR、SSIM.
"""

import math

import numpy as np
from scipy import signal

from ..core.errors import ContractError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(pred: np.ndarray, target: np.ndarray, name: str):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ContractError(f"{name}: 形状不一致 {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ContractError(f"{name}: 空图像")
    return pred, target


def l1(pred: np.ndarray, target: np.ndarray) -> float:
    pred, target = _pair(pred, target, "l1")
    return float(np.abs(pred - target).mean())


def psnr(pred: np.ndarray, target: np.ndarray, peak: float = 1.0) -> float:
    """10·log10(peak²/MSE)；MSE 为 0 时返回 +inf."""
    pred, target = _pair(pred, target, "psnr")
    mse = float(np.mean((pred - target) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    coords = np.arange(size, dtype=np.float64) - size // 2
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    g /= g.sum()
    return np.outer(g, g)


def ssim(pred: np.ndarray, target: np.ndarray, data_range: float = 1.0) -> float:
    """
    单尺度 SSIM: 11×11 高斯窗（σ=1.5），只在完整窗口上取平均，逐通道计算后平均.

    Args:
        pred: [C,H,W] 或 [H,W]
        target: 同形状
    """
    pred, target = _pair(pred, target, "ssim")
    if pred.ndim == 2:
        pred, target = pred[None], target[None]
    if pred.ndim != 3:
        raise ContractError(f"ssim: 需要 [C,H,W] 或 [H,W]，实际 {pred.shape}")
    if min(pred.shape[1:]) < SSIM_WINDOW:
        raise ContractError(f"ssim: 图像 {pred.shape[1:]} 小于窗口 {SSIM_WINDOW}")
    window = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    def filt(img):
        return signal.convolve2d(img, window, mode="valid")

    scores = []
    for x, y in zip(pred, target):
        mu_x, mu_y = filt(x), filt(y)
        sxx = filt(x * x) - mu_x * mu_x
        syy = filt(y * y) - mu_y * mu_y
        sxy = filt(x * y) - mu_x * mu_y
        numerator = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
        denominator = (mu_x ** 2 + mu_y ** 2 + c1) * (sxx + syy + c2)
        scores.append(float(np.mean(numerator / denominator)))
    return float(np.clip(np.mean(scores), -1.0, 1.0))
