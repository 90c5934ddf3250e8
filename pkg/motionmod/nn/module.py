#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
模块容器与基础层.

参数按属性插入顺序遍历，名称以 "." 连接；每层的初始化从以层名为标签的随机子流抽取.
"""

import math
from contextlib import contextmanager
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..autograd import ops
from ..autograd.random import RngStream
from ..autograd.tensor import Parameter, Tensor, get_default_dtype
from ..core.errors import CheckpointMismatchError, ContractError

LEAKY_SLOPE = 0.2


def kaiming_std(fan_in: int, slope: float = LEAKY_SLOPE) -> float:
    """LeakyReLU 的 fan-in 缩放标准差."""
    return math.sqrt(2.0 / (1.0 + slope * slope)) / math.sqrt(fan_in)


class Module:
    """可组合模块基类."""

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, ModuleList):
                for i, item in enumerate(value):
                    yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """严格加载：名称集合与形状必须完全一致."""
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        if missing or extra:
            raise CheckpointMismatchError(
                f"参数名不一致: 缺少 {missing[:5]}，多余 {extra[:5]}"
            )
        for name, p in own.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise CheckpointMismatchError(
                    f"参数 {name} 形状不一致: 检查点 {value.shape}，当前 {p.shape}"
                )
            p.data = np.ascontiguousarray(value, dtype=p.dtype)

    def cast(self, dtype) -> "Module":
        for _, p in self.named_parameters():
            p.data = p.data.astype(dtype)
        return self

    @contextmanager
    def frozen(self):
        """临时关闭所有参数的梯度跟踪."""
        params = self.parameters()
        flags = [p.requires_grad for p in params]
        for p in params:
            p.requires_grad = False
        try:
            yield self
        finally:
            for p, flag in zip(params, flags):
                p.requires_grad = flag

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


class ModuleList(list):
    """按序号命名参数的模块列表."""


def _param(rng: RngStream, shape: Sequence[int], std: float, name: str) -> Parameter:
    data = rng.normal(tuple(shape)) * std
    return Parameter(data.astype(get_default_dtype()), name=name)


def _zeros(shape: Sequence[int], name: str, fill: float = 0.0) -> Parameter:
    return Parameter(np.full(tuple(shape), fill, dtype=get_default_dtype()), name=name)


class Conv2d(Module):
    """
    二维卷积层.

    Args:
        rng: 父随机流；本层使用其名为 label 的子流
        label: 层标签
        zero_init: 权重置零（偏移/掩码回归头使用）
    """

    def __init__(
        self,
        rng: RngStream,
        label: str,
        cin: int,
        cout: int,
        kernel: int = 3,
        stride: int = 1,
        bias: bool = True,
        zero_init: bool = False,
    ):
        if kernel % 2 == 0:
            raise ContractError(f"卷积核尺寸必须为奇数: {kernel}")
        self.stride = stride
        self.pad = kernel // 2
        shape = (cout, cin, kernel, kernel)
        if zero_init:
            self.weight = _zeros(shape, f"{label}.weight")
        else:
            std = kaiming_std(cin * kernel * kernel)
            self.weight = _param(rng.child(label), shape, std, f"{label}.weight")
        self.bias = _zeros((cout,), f"{label}.bias") if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride, pad=self.pad)


class Conv3d(Module):
    """三维（时空）卷积层，stride 为 (t, h, w)."""

    def __init__(
        self,
        rng: RngStream,
        label: str,
        cin: int,
        cout: int,
        kernel: int = 3,
        stride: Tuple[int, int, int] = (1, 1, 1),
    ):
        if kernel % 2 == 0:
            raise ContractError(f"卷积核尺寸必须为奇数: {kernel}")
        self.stride = tuple(stride)
        self.pad = kernel // 2
        shape = (cout, cin, kernel, kernel, kernel)
        std = kaiming_std(cin * kernel ** 3)
        self.weight = _param(rng.child(label), shape, std, f"{label}.weight")
        self.bias = _zeros((cout,), f"{label}.bias")

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv3d(x, self.weight, self.bias, stride=self.stride, pad=self.pad)


class Linear(Module):
    """全连接层；bias_fill 用于把风格仿射头的偏置初始化为 1."""

    def __init__(
        self,
        rng: RngStream,
        label: str,
        fin: int,
        fout: int,
        bias_fill: float = 0.0,
        gain: Optional[float] = None,
    ):
        std = gain if gain is not None else kaiming_std(fin)
        self.weight = _param(rng.child(label), (fin, fout), std, f"{label}.weight")
        self.bias = _zeros((fout,), f"{label}.bias", fill=bias_fill)

    def forward(self, x: Tensor) -> Tensor:
        return ops.add(ops.matmul(x, self.weight), self.bias)
