#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
确定性伪随机数流：splitmix64 播种的 xoshiro256**，按 (seed, label) 派生命名子流.

同一 (seed, label, 抽取序号) 在任何平台上给出同一个 64 位整数，
初始化与数据生成都从带标签的子流抽取，因此模块构造顺序不会改变数值.
"""

import hashlib
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

_MASK64 = (1 << 64) - 1

Shape = Union[int, Tuple[int, ...], None]


def splitmix64(x: int) -> Tuple[int, int]:
    """推进一步 splitmix64.

    Returns:
        (新状态, 输出值)
    """
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


def derive_seed(seed: int, label: str) -> int:
    """把 (seed, label) 哈希为 64 位子流种子."""
    digest = hashlib.blake2b(
        f"{int(seed)}:{label}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """
    命名随机子流.

    Args:
        seed: 全局种子
        label: 子流标签，子流的子流以 "/" 连接
    """

    def __init__(self, seed: int, label: str = ""):
        self.seed = int(seed)
        self.label = label
        x = derive_seed(self.seed, label)
        state = []
        for _ in range(4):
            x, out = splitmix64(x)
            state.append(out)
        self._s = state
        self.draws = 0

    def child(self, label: str) -> "RngStream":
        """派生子流；与当前流已抽取多少次无关."""
        full = f"{self.label}/{label}" if self.label else label
        return RngStream(self.seed, full)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        self.draws += 1
        return result

    def _u64_block(self, n: int) -> np.ndarray:
        return np.array([self.next_u64() for _ in range(n)], dtype=np.uint64)

    def random(self, size: Shape = None) -> Union[float, np.ndarray]:
        """[0, 1) 均匀分布（53 位精度）."""
        if size is None:
            return (self.next_u64() >> 11) * (1.0 / (1 << 53))
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        bits = self._u64_block(n) >> np.uint64(11)
        return (bits.astype(np.float64) * (1.0 / (1 << 53))).reshape(shape)

    def uniform(self, low: float = 0.0, high: float = 1.0, size: Shape = None):
        u = self.random(size)
        return low + (high - low) * u

    def normal(self, size: Shape = None, mean: float = 0.0, std: float = 1.0):
        """Box-Muller 正态分布."""
        if size is None:
            u1 = 1.0 - self.random()
            u2 = self.random()
            return mean + std * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        pairs = (n + 1) // 2
        u = self.random(2 * pairs).reshape(pairs, 2)
        u1 = 1.0 - u[:, 0]
        u2 = u[:, 1]
        radius = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate(
            [radius * np.cos(2.0 * np.pi * u2), radius * np.sin(2.0 * np.pi * u2)]
        )[:n]
        return (mean + std * z).reshape(shape)

    def integers(self, low: int, high: int) -> int:
        """[low, high) 内的整数."""
        if high <= low:
            raise ValueError(f"整数区间为空: [{low}, {high})")
        return low + self.next_u64() % (high - low)

    def permutation(self, n: int) -> List[int]:
        """Fisher-Yates 洗牌."""
        items = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.integers(0, i + 1)
            items[i], items[j] = items[j], items[i]
        return items

    def choice(self, items: Sequence, k: Optional[int] = None):
        if k is None:
            return items[self.integers(0, len(items))]
        return [items[i] for i in self.permutation(len(items))[:k]]

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, label={self.label!r}, draws={self.draws})"
