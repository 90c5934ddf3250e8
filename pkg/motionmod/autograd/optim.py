#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Adam 优化器.
"""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Sequence

import numpy as np

from ..core.errors import ContractError
from .tensor import Parameter


@dataclass
class AdamState:
    """每个参数的一阶/二阶矩及步数."""

    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[int, np.ndarray] = field(default_factory=dict)
    v: Dict[int, np.ndarray] = field(default_factory=dict)


def adam_step(params: Sequence[Parameter], grads: Mapping, state: AdamState) -> None:
    """
    原地执行一步带偏差修正的 Adam 更新.

    Args:
        params: 参数列表（顺序决定矩的存放）
        grads: 参数 -> 梯度；缺失的参数视为零梯度
        state: 优化器状态
    """
    if state.step < 0:
        raise ContractError(f"Adam 步数不能为负: {state.step}")
    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    for index, p in enumerate(params):
        g = grads.get(p)
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.shape:
            raise ContractError(
                f"Adam: 参数 {p.name or index} 形状 {p.shape} 与梯度形状 {g.shape} 不一致"
            )
        m = state.m.setdefault(index, np.zeros_like(p.data))
        v = state.v.setdefault(index, np.zeros_like(p.data))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        update = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        p.data -= update.astype(p.dtype)
