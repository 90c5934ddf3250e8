#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
双线性采样、位移场反向变形与光流着色.

坐标约定: 像素中心为整数坐标，通道 0 为 x（列），通道 1 为 y（行）.
越界的邻点按零值参与插值，不做截断.
"""

from typing import Optional

import numpy as np

from ..autograd import ops
from ..autograd.tensor import Tensor, as_tensor, record
from ..core.errors import ContractError


def base_grid(height: int, width: int, dtype=np.float64) -> np.ndarray:
    """返回 [2, H, W] 的像素坐标网格（x, y）."""
    ys, xs = np.meshgrid(np.arange(height, dtype=dtype), np.arange(width, dtype=dtype), indexing="ij")
    return np.stack([xs, ys])


def bilinear_sample(image, coords) -> Tensor:
    """
    在任意连续坐标处双线性采样.

    Args:
        image: [B, C, H, W]
        coords: [B, 2, *S]，绝对像素坐标

    Returns:
        Tensor: [B, C, *S]
    """
    image, coords = as_tensor(image), as_tensor(coords)
    if image.ndim != 4:
        raise ContractError(f"bilinear_sample: 图像需为 [B,C,H,W]，实际 {image.shape}")
    if coords.ndim < 2 or coords.shape[0] != image.shape[0] or coords.shape[1] != 2:
        raise ContractError(
            f"bilinear_sample: 坐标需为 [B,2,...]，实际 {coords.shape}（图像 {image.shape}）"
        )
    b, c, h, w = image.shape
    sample_shape = coords.shape[2:]
    n = int(np.prod(sample_shape)) if sample_shape else 1

    x = coords.data[:, 0].reshape(b, n)
    y = coords.data[:, 1].reshape(b, n)
    x0 = np.floor(x)
    y0 = np.floor(y)
    dx = (x - x0).astype(image.dtype)
    dy = (y - y0).astype(image.dtype)
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    flat = image.data.reshape(b, c, h * w)
    corners = []
    for ox, oy in ((0, 0), (1, 0), (0, 1), (1, 1)):
        xi, yi = x0 + ox, y0 + oy
        valid = (xi >= 0) & (xi <= w - 1) & (yi >= 0) & (yi <= h - 1)
        idx = np.where(valid, yi * w + xi, 0)
        values = np.take_along_axis(flat, idx[:, None, :], axis=2) * valid[:, None, :]
        corners.append((idx, valid, values))

    w00 = (1 - dx) * (1 - dy)
    w10 = dx * (1 - dy)
    w01 = (1 - dx) * dy
    w11 = dx * dy
    weights = (w00, w10, w01, w11)
    out = np.zeros((b, c, n), dtype=image.dtype)
    for (_, _, values), wt in zip(corners, weights):
        out += wt[:, None, :] * values

    def vjp(g, needs):
        g = g.reshape(b, c, n)
        g_image = g_coords = None
        if needs[0]:
            base = (np.arange(b)[:, None, None] * c + np.arange(c)[None, :, None]) * (h * w)
            index_parts, weight_parts = [], []
            for (idx, valid, _), wt in zip(corners, weights):
                index_parts.append((base + idx[:, None, :]).reshape(-1))
                weight_parts.append((g * (wt * valid)[:, None, :]).reshape(-1))
            g_image = np.bincount(
                np.concatenate(index_parts),
                weights=np.concatenate(weight_parts),
                minlength=b * c * h * w,
            ).reshape(b, c, h, w).astype(image.dtype)
        if needs[1]:
            v00, v10, v01, v11 = (values for _, _, values in corners)
            d_dx = (v10 - v00) * (1 - dy)[:, None, :] + (v11 - v01) * dy[:, None, :]
            d_dy = (v01 - v00) * (1 - dx)[:, None, :] + (v11 - v10) * dx[:, None, :]
            gx = (g * d_dx).sum(axis=1)
            gy = (g * d_dy).sum(axis=1)
            g_coords = np.stack([gx, gy], axis=1).reshape(coords.shape).astype(coords.dtype)
        return (g_image, g_coords)

    return record("bilinear_sample", out.reshape((b, c) + sample_shape), (image, coords), vjp)


def warp(flow, image) -> Tensor:
    """
    反向变形: out(p) = image(p + flow(p)).

    Args:
        flow: [B, 2, H, W] 位移场（像素）
        image: [B, C, H, W]
    """
    flow, image = as_tensor(flow), as_tensor(image)
    if flow.ndim != 4 or flow.shape[1] != 2:
        raise ContractError(f"warp: 位移场需为 [B,2,H,W]，实际 {flow.shape}")
    if flow.shape[0] != image.shape[0] or flow.shape[2:] != image.shape[2:]:
        raise ContractError(f"warp: 位移场 {flow.shape} 与图像 {image.shape} 尺寸不一致")
    grid = base_grid(image.shape[2], image.shape[3], dtype=flow.dtype)
    coords = ops.add(flow, grid[None])
    return bilinear_sample(image, coords)


def generate_color_wheel() -> np.ndarray:
    """Middlebury 色轮，[55, 3]，取值 [0, 1]."""
    ry, yg, gc, cb, bm, mr = 15, 6, 4, 11, 13, 6
    wheel = np.zeros((ry + yg + gc + cb + bm + mr, 3))
    i = 0
    wheel[i:i + ry, 0] = 1.0
    wheel[i:i + ry, 1] = np.arange(ry) / ry
    i += ry
    wheel[i:i + yg, 0] = 1.0 - np.arange(yg) / yg
    wheel[i:i + yg, 1] = 1.0
    i += yg
    wheel[i:i + gc, 1] = 1.0
    wheel[i:i + gc, 2] = np.arange(gc) / gc
    i += gc
    wheel[i:i + cb, 1] = 1.0 - np.arange(cb) / cb
    wheel[i:i + cb, 2] = 1.0
    i += cb
    wheel[i:i + bm, 0] = np.arange(bm) / bm
    wheel[i:i + bm, 2] = 1.0
    i += bm
    wheel[i:i + mr, 0] = 1.0
    wheel[i:i + mr, 2] = 1.0 - np.arange(mr) / mr
    return wheel


COLOR_WHEEL = generate_color_wheel()


def flow_to_color(flow: np.ndarray, max_magnitude: Optional[float] = None, eps: float = 1e-5) -> np.ndarray:
    """
    光流着色：色相表示方向，饱和度表示按最大幅值归一化的长度，零位移为白色.

    Args:
        flow: [2, H, W] 位移场
        max_magnitude: 归一化用的最大幅值，缺省取该场的最大值

    Returns:
        np.ndarray: [H, W, 3] 浮点 RGB，取值 [0, 1]
    """
    flow = np.asarray(flow, dtype=np.float64)
    if flow.ndim != 3 or flow.shape[0] != 2:
        raise ContractError(f"flow_to_color: 位移场需为 [2,H,W]，实际 {flow.shape}")
    u, v = flow[0], flow[1]
    angle = np.arctan2(-v, -u) / np.pi
    length = np.sqrt(u * u + v * v)
    if max_magnitude is None:
        max_magnitude = max(float(length.max(initial=0.0)), eps)
    length = np.clip(length / max_magnitude, 0.0, 1.0)

    idx = (angle + 1.0) / 2.0 * (COLOR_WHEEL.shape[0] - 1)
    idx0 = np.floor(idx).astype(np.int64)
    idx1 = idx0 + 1
    idx1[idx1 == COLOR_WHEEL.shape[0]] = 0
    alpha = (idx - idx0)[..., None]
    rgb = (1.0 - alpha) * COLOR_WHEEL[idx0] + alpha * COLOR_WHEEL[idx1]
    return 1.0 - length[..., None] * (1.0 - rgb)
