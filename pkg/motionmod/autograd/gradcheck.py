#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
中心有限差分梯度检查.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..core.errors import ContractError
from .random import RngStream
from .tensor import Tensor, Tape, backward, default_dtype, no_grad

# 相对误差分母下限：梯度绝对值小于它时按绝对误差 REL_FLOOR * tolerance 判定
REL_FLOOR = 1e-3
DEFAULT_TOLERANCE = 1e-4


@dataclass
class GradcheckResult:
    """单个用例的检查结果."""

    name: str
    max_rel_error: float
    worst_input: str
    probes: int
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def relative_error(analytic: float, numeric: float, floor: float = REL_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def finite_difference_step(value: float) -> float:
    return 1e-5 * max(1.0, abs(value))


def check_gradients(
    name: str,
    fn: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    rng: RngStream,
    max_probes: int = 24,
    tolerance: float = DEFAULT_TOLERANCE,
    input_names: Optional[Sequence[str]] = None,
) -> GradcheckResult:
    """
    比较解析梯度与中心差分.

    Args:
        name: 用例名
        fn: fn(*tensors) -> 标量 Tensor
        inputs: 各输入的初值（按 f64 处理）
        rng: 选择探测坐标的随机流
        max_probes: 每个输入最多探测的坐标数
        tolerance: 相对误差阈值
        input_names: 输入名称，用于报告

    Returns:
        GradcheckResult
    """
    names = list(input_names) if input_names else [f"x{i}" for i in range(len(inputs))]
    with default_dtype("f64"):
        tensors = [Tensor(np.array(x, dtype=np.float64), requires_grad=True) for x in inputs]
        with Tape(name) as tape:
            loss = fn(*tensors)
        if loss.data.size != 1:
            raise ContractError(f"梯度检查用例 {name} 必须返回标量")
        grads = backward(loss, tape, params=tensors)

        worst, worst_name, probes = 0.0, "", 0
        for tensor, label in zip(tensors, names):
            flat = tensor.data.reshape(-1)
            analytic = grads[tensor].reshape(-1)
            count = flat.size
            if count <= max_probes:
                coords: List[int] = list(range(count))
            else:
                coords = sorted(rng.child(label).permutation(count)[:max_probes])
            for c in coords:
                original = flat[c]
                h = finite_difference_step(original)
                with no_grad():
                    flat[c] = original + h
                    plus = fn(*tensors).item()
                    flat[c] = original - h
                    minus = fn(*tensors).item()
                flat[c] = original
                numeric = (plus - minus) / (2.0 * h)
                err = relative_error(float(analytic[c]), numeric)
                probes += 1
                if err > worst:
                    worst, worst_name = err, f"{label}[{c}]"
    return GradcheckResult(name, worst, worst_name, probes, tolerance)
