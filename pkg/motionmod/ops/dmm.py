#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
可变形运动调制（DMM）算子.

风格调制/解调后的逐样本卷积核，作用在由偏移与掩码变形的采样网格上.
偏移通道布局固定为 [Δx1, Δy1, ..., ΔxK, ΔyK]，tap k 按行优先遍历卷积核.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..autograd import ops
from ..autograd.random import RngStream
from ..autograd.tensor import Parameter, Tensor, as_tensor, get_default_dtype
from ..core.errors import ContractError
from ..nn.module import LEAKY_SLOPE, Conv2d, Linear, Module, kaiming_std
from .sampling import base_grid, bilinear_sample

DEMOD_EPS = 1e-8


def tap_offsets(kh: int, kw: int) -> np.ndarray:
    """规则网格偏移 p_k，[K, 2]，每行为 (x, y)."""
    if kh % 2 == 0 or kw % 2 == 0:
        raise ContractError(f"DMM 卷积核尺寸必须为奇数，实际 {kh}x{kw}")
    return np.array(
        [(j - kw // 2, i - kh // 2) for i in range(kh) for j in range(kw)], dtype=np.float64
    )


def modulate_demodulate(weight, style, eps: float = DEMOD_EPS, demodulate: bool = True) -> Tensor:
    """
    风格调制与解调.

    Args:
        weight: [Cout, Cin, kh, kw]
        style: 每个输入通道的调制标量 A，[B, Cin]
        eps: 解调分母中的 ε
        demodulate: 关闭时只做调制

    Returns:
        Tensor: 逐样本卷积核 [B, Cout, Cin, kh, kw]
    """
    if eps <= 0:
        raise ContractError(f"解调 ε 必须为正，实际 {eps}")
    weight, style = as_tensor(weight), as_tensor(style)
    if weight.ndim != 4 or style.ndim != 2 or style.shape[1] != weight.shape[1]:
        raise ContractError(
            f"modulate_demodulate: 权重 {weight.shape} 与风格标量 {style.shape} 不匹配"
        )
    cout, cin, kh, kw = weight.shape
    modulated = ops.mul(
        ops.reshape(weight, (1, cout, cin, kh, kw)),
        ops.reshape(style, (style.shape[0], 1, cin, 1, 1)),
    )
    if not demodulate:
        return modulated
    energy = ops.sum(ops.square(modulated), axis=(2, 3, 4), keepdims=True)
    return ops.div(modulated, ops.sqrt(ops.add(energy, eps)))


def regress_offset_mask(
    head: Conv2d,
    branch_feat,
    prev_layer,
    taps: int,
    max_offset: float,
    with_mask: bool = True,
) -> Tuple[Tensor, Optional[Tensor]]:
    """
    由分支特征与上一层解码特征回归偏移和掩码.

    Returns:
        (offsets [B,2K,H,W], mask [B,K,H,W] 或 None)
    """
    branch_feat, prev_layer = as_tensor(branch_feat), as_tensor(prev_layer)
    if branch_feat.shape[0] != prev_layer.shape[0] or branch_feat.shape[2:] != prev_layer.shape[2:]:
        raise ContractError(
            f"regress_offset_mask: 分支特征 {branch_feat.shape} 与上一层 {prev_layer.shape} 尺寸不一致"
        )
    raw = head(ops.concat([branch_feat, prev_layer], axis=1))
    offsets = ops.mul(ops.tanh(raw[:, : 2 * taps]), float(max_offset))
    if not with_mask:
        return offsets, None
    mask = ops.sigmoid(raw[:, 2 * taps: 3 * taps])
    return offsets, mask


def deform_conv2d(feat, offsets, mask, weight) -> Tensor:
    """
    调制可变形卷积（无偏置）.

    Args:
        feat: [B, Cin, H, W]
        offsets: [B, 2K, H, W]
        mask: [B, K, H, W]，None 表示恒为 1
        weight: 逐样本 [B, Cout, Cin, kh, kw] 或共享 [Cout, Cin, kh, kw]

    Returns:
        Tensor: [B, Cout, H, W]
    """
    feat, offsets, weight = as_tensor(feat), as_tensor(offsets), as_tensor(weight)
    if feat.ndim != 4:
        raise ContractError(f"deform_conv2d: 特征需为 [B,C,H,W]，实际 {feat.shape}")
    b, cin, h, w = feat.shape
    if weight.ndim not in (4, 5) or weight.shape[-3] != cin:
        raise ContractError(f"deform_conv2d: 权重 {weight.shape} 与输入通道 {cin} 不匹配")
    kh, kw = weight.shape[-2:]
    grid_taps = tap_offsets(kh, kw)
    k = kh * kw
    if offsets.shape != (b, 2 * k, h, w):
        raise ContractError(f"deform_conv2d: 偏移形状 {offsets.shape} 应为 {(b, 2 * k, h, w)}")
    if mask is not None:
        mask = as_tensor(mask)
        if mask.shape != (b, k, h, w):
            raise ContractError(f"deform_conv2d: 掩码形状 {mask.shape} 应为 {(b, k, h, w)}")

    # 规则采样位置 p + p_k: [1, 2, K, H, W]
    grid = base_grid(h, w, dtype=feat.dtype)
    regular = grid[:, None, :, :] + grid_taps.T.astype(feat.dtype)[:, :, None, None]
    shifts = ops.transpose(ops.reshape(offsets, (b, k, 2, h, w)), (0, 2, 1, 3, 4))
    coords = ops.add(shifts, regular[None])
    sampled = bilinear_sample(feat, coords)  # [B, Cin, K, H, W]
    if mask is not None:
        sampled = ops.mul(sampled, ops.reshape(mask, (b, 1, k, h, w)))

    if weight.ndim == 5:
        if weight.shape[0] != b:
            raise ContractError(f"deform_conv2d: 逐样本权重批大小 {weight.shape[0]} 与输入 {b} 不一致")
        kernel = ops.reshape(weight, (b, weight.shape[1], cin, k))
        return ops.einsum("bckhw,bock->bohw", sampled, kernel)
    kernel = ops.reshape(weight, (weight.shape[0], cin, k))
    return ops.einsum("bckhw,ock->bohw", sampled, kernel)


@dataclass
class DMMOutput:
    """DMM 块输出及可视化所需的偏移/掩码."""

    features: Tensor
    offsets: Optional[Tensor]
    mask: Optional[Tensor]


class DMMBlock(Module):
    """
    DMM 块: 风格仿射 -> 调制解调 -> 偏移/掩码回归 -> 可变形卷积 -> LeakyReLU.

    Args:
        rng: 初始化随机流
        label: 参数名前缀
        branch_channels: 分支特征通道数
        prev_channels: 上一层解码特征通道数
        out_channels: 输出通道数
        d_style: 风格码维度
        flags: 消融开关（no_dmm / no_dcn / no_style / no_mask）
    """

    def __init__(
        self,
        rng: RngStream,
        label: str,
        branch_channels: int,
        prev_channels: int,
        out_channels: int,
        d_style: int,
        kernel: int = 3,
        max_offset: float = 8.0,
        demod_eps: float = DEMOD_EPS,
        flags=None,
        slope: float = LEAKY_SLOPE,
    ):
        self.kernel = kernel
        self.taps = kernel * kernel
        self.max_offset = max_offset
        self.demod_eps = demod_eps
        self.slope = slope
        self.no_dmm = bool(getattr(flags, "no_dmm", False))
        self.no_dcn = bool(getattr(flags, "no_dcn", False))
        self.no_style = bool(getattr(flags, "no_style", False))
        self.no_mask = bool(getattr(flags, "no_mask", False))

        if self.no_dmm:
            self.plain = Conv2d(rng, f"{label}.plain", branch_channels + prev_channels, out_channels, kernel)
            return
        if not self.no_style:
            self.affine = Linear(rng, f"{label}.affine", d_style, branch_channels, bias_fill=1.0)
        std = kaiming_std(branch_channels * self.taps, slope)
        data = rng.child(f"{label}.weight").normal((out_channels, branch_channels, kernel, kernel)) * std
        self.weight = Parameter(data.astype(get_default_dtype()), name=f"{label}.weight")
        if not self.no_dcn:
            head_out = (2 if self.no_mask else 3) * self.taps
            self.head = Conv2d(
                rng, f"{label}.head", branch_channels + prev_channels, head_out, kernel, zero_init=True
            )

    def forward(self, branch, prev, style) -> DMMOutput:
        branch, prev = as_tensor(branch), as_tensor(prev)
        if self.no_dmm:
            out = self.plain(ops.concat([branch, prev], axis=1))
            return DMMOutput(ops.leaky_relu(out, self.slope), None, None)

        if self.no_style:
            weight = self.weight
        else:
            scalars = self.affine(style)
            weight = modulate_demodulate(self.weight, scalars, self.demod_eps)

        b, _, h, w = branch.shape
        if self.no_dcn:
            offsets = Tensor(np.zeros((b, 2 * self.taps, h, w)), dtype=branch.dtype)
            mask = None
        else:
            offsets, mask = regress_offset_mask(
                self.head, branch, prev, self.taps, self.max_offset, with_mask=not self.no_mask
            )
        out = deform_conv2d(branch, offsets, mask, weight)
        return DMMOutput(ops.leaky_relu(out, self.slope), offsets, mask)
