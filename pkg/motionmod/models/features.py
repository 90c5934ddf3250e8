#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
固定的随机卷积特征金字塔.

参数在构造时由种子确定并做谱归一化（5 步幂迭代），之后不再变化，
可在线程之间共享. 输出抽头 phi1..phi4 的步长依次为 1, 2, 4, 8.
"""

from typing import Dict, Tuple

import numpy as np

from ..autograd import ops
from ..autograd.random import RngStream
from ..autograd.tensor import Tensor, as_tensor, get_default_dtype, no_grad
from ..core.errors import ContractError
from ..nn.module import kaiming_std

TAPS: Tuple[Tuple[str, int, int, int], ...] = (
    ("phi1", 3, 16, 1),
    ("phi2", 16, 32, 2),
    ("phi3", 32, 64, 2),
    ("phi4", 64, 64, 2),
)

CLIP_FEATURE_DIM = 64


def spectral_normalize(weight: np.ndarray, rng: RngStream, steps: int = 5) -> np.ndarray:
    """用幂迭代估计最大奇异值并把权重除以它."""
    matrix = weight.reshape(weight.shape[0], -1)
    u = rng.normal(matrix.shape[0])
    u /= np.linalg.norm(u) + 1e-12
    v = matrix.T @ u
    for _ in range(steps):
        v = matrix.T @ u
        v /= np.linalg.norm(v) + 1e-12
        u = matrix @ v
        u /= np.linalg.norm(u) + 1e-12
    sigma = float(u @ matrix @ v)
    return weight / max(sigma, 1e-12)


class FeatureExtractor:
    """
    冻结的特征提取器.

    Args:
        seed: 全局种子
        slope: LeakyReLU 斜率
    """

    def __init__(self, seed: int, slope: float = 0.2, power_steps: int = 5):
        rng = RngStream(seed, "features")
        self.slope = slope
        self._weights: Dict[str, np.ndarray] = {}
        self._strides: Dict[str, int] = {}
        for name, cin, cout, stride in TAPS:
            w = rng.child(name).normal((cout, cin, 3, 3)) * kaiming_std(cin * 9, slope)
            self._weights[name] = spectral_normalize(w, rng.child(f"{name}.sn"), power_steps)
            self._strides[name] = stride

    def weights(self, name: str) -> np.ndarray:
        return self._weights[name].copy()

    def __call__(self, image, upto: str = "phi4") -> Dict[str, Tensor]:
        """
        提取各抽头特征.

        Args:
            image: [B, 3, H, W]
            upto: 最后一个需要的抽头

        Returns:
            Dict[str, Tensor]: 抽头名 -> 特征
        """
        x = as_tensor(image)
        if x.ndim != 4 or x.shape[1] != 3:
            raise ContractError(f"特征提取器输入需为 [B,3,H,W]，实际 {x.shape}")
        names = [t[0] for t in TAPS]
        if upto not in names:
            raise ContractError(f"未知的特征抽头: {upto}")
        feats: Dict[str, Tensor] = {}
        for name in names[: names.index(upto) + 1]:
            weight = Tensor(self._weights[name], dtype=x.dtype)
            x = ops.leaky_relu(ops.conv2d(x, weight, stride=self._strides[name], pad=1), self.slope)
            feats[name] = x
        return feats

    def clip_features(self, clips: np.ndarray, chunk: int = 32) -> np.ndarray:
        """
        片段特征: 时间平均的池化 phi4 与相邻帧差绝对值的时间平均，各取前 32 维.

        Args:
            clips: [N, T, 3, H, W]，T >= 2

        Returns:
            np.ndarray: [N, 64]
        """
        clips = np.asarray(clips)
        if clips.ndim != 5 or clips.shape[1] < 2:
            raise ContractError(f"片段需为 [N,T,3,H,W] 且 T>=2，实际 {clips.shape}")
        n, t = clips.shape[:2]
        pooled = self.frame_embeddings(clips.reshape((n * t,) + clips.shape[2:]), chunk)
        return embeddings_to_clip_features(pooled.reshape(n, t, -1))

    def frame_embeddings(self, frames: np.ndarray, chunk: int = 32) -> np.ndarray:
        """逐帧的空间平均 phi4，[N,3,H,W] -> [N,64] float64."""
        frames = np.asarray(frames, dtype=get_default_dtype())
        pooled_chunks = []
        with no_grad():
            for start in range(0, len(frames), chunk):
                phi4 = self(frames[start:start + chunk])["phi4"].data
                pooled_chunks.append(phi4.mean(axis=(2, 3)))
        return np.concatenate(pooled_chunks).astype(np.float64)


def embeddings_to_clip_features(pooled: np.ndarray) -> np.ndarray:
    """[N,T,64] 的逐帧嵌入 -> [N,64] 片段特征."""
    if pooled.ndim != 3 or pooled.shape[1] < 2:
        raise ContractError(f"嵌入需为 [N,T,D] 且 T>=2，实际 {pooled.shape}")
    half = CLIP_FEATURE_DIM // 2
    appearance = pooled.mean(axis=1)[:, :half]
    motion = np.abs(np.diff(pooled, axis=1)).mean(axis=1)[:, :half]
    return np.concatenate([appearance, motion], axis=1)
