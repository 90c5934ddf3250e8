#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
双向循环视频生成器 G(I_s, P_s, P_{1:M}).

流程: 预变形帧 x_i = warp(F_{i->s}, I_s) -> 共享编码器 E -> 前向/后向循环融合
-> 三层 DMM 渐进解码（两分支求和融合）-> sigmoid 输出.
"""

from typing import Dict, List, Optional

import numpy as np

from ..autograd import ops
from ..autograd.random import RngStream
from ..autograd.tensor import Tensor, as_tensor
from ..core.errors import ContractError
from ..nn.module import Conv2d, Linear, Module, ModuleList
from ..ops.dmm import DMMBlock
from ..ops.sampling import warp
from .config import ArchConfig

BRANCHES = ("forward", "backward")


class StyleEncoder(Module):
    """4 层步长 2 卷积 -> 全局平均池化 -> 仿射，得到风格码."""

    widths = (16, 32, 64, 64)

    def __init__(self, rng: RngStream, d_style: int, slope: float = 0.2):
        self.slope = slope
        convs = ModuleList()
        cin = 3
        for i, cout in enumerate(self.widths):
            convs.append(Conv2d(rng, f"style.conv{i}", cin, cout, 3, stride=2))
            cin = cout
        self.convs = convs
        self.proj = Linear(rng, "style.proj", cin, d_style)

    def forward(self, image) -> Tensor:
        x = as_tensor(image)
        for conv in self.convs:
            x = ops.leaky_relu(conv(x), self.slope)
        return self.proj(ops.avg_pool_global(x))


class StructuralEncoder(Module):
    """姿态序列上的自循环卷积单元: s_i = LeakyReLU(conv(concat(down(P_i), s_{i-1})))."""

    def __init__(self, rng: RngStream, keypoints: int, channels: int, factor: int,
                 slope: float = 0.2, recurrent: bool = True):
        self.factor = factor
        self.channels = channels
        self.slope = slope
        self.recurrent = recurrent
        self.conv = Conv2d(rng, "structural.conv", keypoints + channels, channels, 3)

    def initial_state(self, batch: int, height: int, width: int, dtype) -> Tensor:
        return Tensor(np.zeros((batch, self.channels, height // self.factor, width // self.factor)), dtype=dtype)

    def forward(self, pose, prev) -> Tensor:
        pose, prev = as_tensor(pose), as_tensor(prev)
        down = ops.avg_pool2d(pose, self.factor)
        if down.shape[0] != prev.shape[0] or down.shape[2:] != prev.shape[2:]:
            raise ContractError(f"structural_encode: 姿态 {pose.shape} 与状态 {prev.shape} 尺寸不一致")
        if not self.recurrent:
            prev = Tensor(np.zeros(prev.shape), dtype=prev.dtype)
        return ops.leaky_relu(self.conv(ops.concat([down, prev], axis=1)), self.slope)


class FrameEncoder(Module):
    """两个方向共享的预变形帧编码器 E，输出分辨率减半."""

    def __init__(self, rng: RngStream, channels: int, slope: float = 0.2):
        self.slope = slope
        self.conv0 = Conv2d(rng, "encoder.conv0", 3, channels, 3)
        self.conv1 = Conv2d(rng, "encoder.conv1", channels, channels, 3, stride=2)

    def forward(self, frame) -> Tensor:
        x = ops.leaky_relu(self.conv0(frame), self.slope)
        return ops.leaky_relu(self.conv1(x), self.slope)


class Fusion(Module):
    """单方向循环融合: h_i = LeakyReLU(conv(E(x_i) ⊕ h_prev))，⊕ 为拼接或求和."""

    def __init__(self, rng: RngStream, label: str, channels: int, concat: bool = True, slope: float = 0.2):
        self.concat = concat
        self.slope = slope
        cin = 2 * channels if concat else channels
        self.conv = Conv2d(rng, label, cin, channels, 3)

    def forward(self, encoded, prev) -> Tensor:
        merged = ops.concat([encoded, prev], axis=1) if self.concat else ops.add(encoded, prev)
        return ops.leaky_relu(self.conv(merged), self.slope)


class Generator(Module):
    """
    完整生成器.

    被消融的分支不构造参数，因此检查点中不存在对应条目.

    Args:
        arch: 结构配置
        rng: 初始化随机流
    """

    def __init__(self, arch: ArchConfig, rng: RngStream):
        self.arch = arch
        flags = arch.flags
        res = arch.resolution
        rng = rng.child("generator")
        self.branches = tuple(
            b for b in BRANCHES if not getattr(flags, f"no_{b}")
        )
        self.style = StyleEncoder(rng, arch.d_style, arch.leaky_slope)
        self.structural = StructuralEncoder(
            rng, arch.keypoints, arch.level_channels[0], 8, arch.leaky_slope,
            recurrent=not flags.no_structural_recurrence,
        )
        self.encoder = FrameEncoder(rng, arch.branch_channels, arch.leaky_slope)
        if "forward" in self.branches:
            self.fuse_forward = Fusion(rng, "fuse_forward", arch.branch_channels, not flags.no_concat, arch.leaky_slope)
        if "backward" in self.branches:
            self.fuse_backward = Fusion(rng, "fuse_backward", arch.branch_channels, not flags.no_concat, arch.leaky_slope)

        # 解码层 l 的分辨率为 res/8 * 2^l，分支特征位于 res/2
        self.level_sizes = [res // 8 * (2 ** l) for l in range(3)]
        self.pool_factors = [(res // 2) // size for size in self.level_sizes]
        for branch in self.branches:
            blocks = ModuleList()
            prev = arch.level_channels[0]
            for level, cout in enumerate(arch.level_channels):
                blocks.append(DMMBlock(
                    rng, f"dmm_{branch}.{level}", arch.branch_channels, prev, cout, arch.d_style,
                    kernel=arch.kernel, max_offset=arch.max_offset, demod_eps=arch.demod_eps,
                    flags=flags, slope=arch.leaky_slope,
                ))
                prev = cout
            setattr(self, f"dmm_{branch}", blocks)
        self.to_rgb = Conv2d(rng, "to_rgb", arch.level_channels[-1], 3, 3)

    # ------------------------------------------------------------------

    def style_encode(self, source) -> Tensor:
        return self.style(source)

    def structural_encode(self, pose, prev) -> Tensor:
        return self.structural(pose, prev)

    def warp_frames(self, source, flows) -> List[Tensor]:
        """把源图按位移场变形到每个目标帧: flows [B,M,2,H,W]."""
        source, flows = as_tensor(source), as_tensor(flows)
        return [warp(flows[:, i], source) for i in range(flows.shape[1])]

    def _propagate(self, frames: List[Tensor], fusion: Fusion) -> List[Tensor]:
        if len(frames) < 1:
            raise ContractError("循环传播至少需要一帧 (M >= 1)")
        states: List[Tensor] = []
        prev: Optional[Tensor] = None
        for frame in frames:
            encoded = self.encoder(frame)
            if prev is None:
                prev = Tensor(np.zeros(encoded.shape), dtype=encoded.dtype)
            prev = fusion(encoded, prev)
            states.append(prev)
        return states

    def propagate_forward(self, frames: List) -> List[Tensor]:
        """f_i = conv_fwd(E(x_i) ⊕ f_{i-1})，f_0 = 0."""
        if "forward" not in self.branches:
            raise ContractError("前向分支已被消融")
        return self._propagate([as_tensor(x) for x in frames], self.fuse_forward)

    def propagate_backward(self, frames: List) -> List[Tensor]:
        """b_i = conv_bwd(E(x_i) ⊕ b_{i+1})，b_{M+1} = 0；结果与输入帧下标对齐."""
        if "backward" not in self.branches:
            raise ContractError("后向分支已被消融")
        states = self._propagate([as_tensor(x) for x in reversed(list(frames))], self.fuse_backward)
        return states[::-1]

    def decode_frame(
        self,
        forward_feat: Optional[Tensor],
        backward_feat: Optional[Tensor],
        structural: Tensor,
        style: Tensor,
        diagnostics: Optional[List[Dict]] = None,
    ) -> Tensor:
        """
        三层渐进解码，两分支 DMM 输出求和后上采样.

        Args:
            diagnostics: 若给出，追加每个 DMM 块的偏移/掩码（numpy）
        """
        feats = {"forward": forward_feat, "backward": backward_feat}
        x = as_tensor(structural)
        for level in range(3):
            fused = None
            for branch in self.branches:
                feat = feats[branch]
                if feat is None:
                    raise ContractError(f"缺少 {branch} 分支特征")
                pooled = ops.avg_pool2d(feat, self.pool_factors[level])
                out = getattr(self, f"dmm_{branch}")[level](pooled, x, style)
                if diagnostics is not None:
                    diagnostics.append({
                        "level": level,
                        "branch": branch,
                        "offsets": None if out.offsets is None else out.offsets.data.copy(),
                        "mask": None if out.mask is None else out.mask.data.copy(),
                    })
                fused = out.features if fused is None else ops.add(fused, out.features)
            x = ops.upsample_nearest(fused, 2)
        return ops.sigmoid(self.to_rgb(x))

    def synthesize(
        self,
        source,
        poses,
        warped: List,
        diagnostics: Optional[List[List[Dict]]] = None,
    ) -> Tensor:
        """
        由预变形帧合成目标帧.

        Args:
            source: I_s [B,3,H,W]
            poses: [B,M,Kp,H,W]
            warped: M 个预变形帧
            diagnostics: 若给出，按帧追加 DMM 诊断

        Returns:
            Tensor: [B,M,3,H,W]
        """
        source, poses = as_tensor(source), as_tensor(poses)
        m = len(warped)
        if m < 1:
            raise ContractError("窗口长度必须至少为 1")
        if poses.ndim != 5 or poses.shape[1] != m:
            raise ContractError(f"姿态序列 {poses.shape} 与窗口长度 {m} 不一致")
        style = self.style_encode(source)
        forward = self.propagate_forward(warped) if "forward" in self.branches else [None] * m
        backward = self.propagate_backward(warped) if "backward" in self.branches else [None] * m
        b, _, h, w = source.shape
        state = self.structural.initial_state(b, h, w, source.dtype)
        frames = []
        for i in range(m):
            state = self.structural_encode(poses[:, i], state)
            frame_diag = [] if diagnostics is not None else None
            frames.append(self.decode_frame(forward[i], backward[i], state, style, frame_diag))
            if diagnostics is not None:
                diagnostics.append(frame_diag)
        return ops.stack(frames, axis=1)

    def generate(self, source, source_pose, poses, flows, diagnostics=None) -> Tensor:
        """
        G(I_s, P_s, P_{1:M}): 输入为 [B,3,H,W], [B,Kp,H,W], [B,M,Kp,H,W], [B,M,2,H,W].
        """
        source, source_pose = as_tensor(source), as_tensor(source_pose)
        poses, flows = as_tensor(poses), as_tensor(flows)
        if poses.ndim != 5 or flows.ndim != 5 or poses.shape[1] != flows.shape[1]:
            raise ContractError(f"姿态 {poses.shape} 与位移场 {flows.shape} 序列长度不一致")
        if source_pose.shape != (poses.shape[0],) + poses.shape[2:]:
            raise ContractError(f"源姿态 {source_pose.shape} 与目标姿态 {poses.shape} 不匹配")
        if source.shape[2:] != flows.shape[3:]:
            raise ContractError(f"源图 {source.shape} 与位移场 {flows.shape} 尺寸不一致")
        warped = self.warp_frames(source, flows)
        return self.synthesize(source, poses, warped, diagnostics)
