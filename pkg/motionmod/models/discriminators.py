#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
空间判别器 D_s 与时间判别器 D_t.
"""

from ..autograd import ops
from ..autograd.random import RngStream
from ..autograd.tensor import Tensor, as_tensor
from ..core.errors import ContractError
from ..nn.module import Conv2d, Conv3d, Module, ModuleList


class SpatialDiscriminator(Module):
    """在 concat(I_s, I) 上的 4 层步长 2 块判别器，输出 1 通道得分图."""

    widths = (32, 64, 128, 1)

    def __init__(self, rng: RngStream, slope: float = 0.2):
        rng = rng.child("d_spatial")
        self.slope = slope
        convs = ModuleList()
        cin = 6
        for i, cout in enumerate(self.widths):
            convs.append(Conv2d(rng, f"conv{i}", cin, cout, 3, stride=2))
            cin = cout
        self.convs = convs

    def forward(self, source, image) -> Tensor:
        source, image = as_tensor(source), as_tensor(image)
        if source.shape != image.shape:
            raise ContractError(f"d_spatial: 源图 {source.shape} 与判别图 {image.shape} 尺寸不一致")
        x = ops.concat([source, image], axis=1)
        last = len(self.convs) - 1
        for i, conv in enumerate(self.convs):
            x = conv(x)
            if i < last:
                x = ops.leaky_relu(x, self.slope)
        return x


class TemporalDiscriminator(Module):
    """在 T 帧片段 [B,3,T,H,W] 上的 3 层时空步长卷积."""

    layers = ((32, (1, 2, 2)), (64, (2, 2, 2)), (1, (2, 2, 2)))

    def __init__(self, rng: RngStream, slope: float = 0.2):
        rng = rng.child("d_temporal")
        self.slope = slope
        convs = ModuleList()
        cin = 3
        for i, (cout, stride) in enumerate(self.layers):
            convs.append(Conv3d(rng, f"conv{i}", cin, cout, 3, stride=stride))
            cin = cout
        self.convs = convs

    def forward(self, clip) -> Tensor:
        x = as_tensor(clip)
        if x.ndim != 5 or x.shape[1] != 3:
            raise ContractError(f"d_temporal: 片段需为 [B,3,T,H,W]，实际 {x.shape}")
        if x.shape[2] < 2:
            raise ContractError(f"d_temporal: 片段长度 T 至少为 2，实际 {x.shape[2]}")
        last = len(self.convs) - 1
        for i, conv in enumerate(self.convs):
            x = conv(x)
            if i < last:
                x = ops.leaky_relu(x, self.slope)
        return x


def frames_to_clip(frames, start: int, length: int) -> Tensor:
    """[B,M,3,H,W] 中取连续 length 帧并转为 [B,3,T,H,W]."""
    frames = as_tensor(frames)
    if start < 0 or start + length > frames.shape[1]:
        raise ContractError(f"片段 [{start}, {start + length}) 超出窗口长度 {frames.shape[1]}")
    return ops.transpose(frames[:, start:start + length], (0, 2, 1, 3, 4))
