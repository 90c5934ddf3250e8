#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
可微基础运算.

所有运算都是输入的纯函数：前向用 numpy 计算，再通过 record() 连同 VJP 登记到磁带.
卷积为互相关（不翻转卷积核），采用 sliding_window_view 展开窗口后 tensordot.
"""

import string
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..core.errors import ContractError
from .tensor import Tensor, as_tensor, record

Number = Union[int, float]
IntOrTuple = Union[int, Tuple[int, ...]]


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """把广播后的梯度按原形状求和还原."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ContractError(f"{op}: 形状无法广播 {a.shape} 与 {b.shape}")


# ---------------------------------------------------------------------------
# 逐元素算术
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)

    def vjp(g, needs):
        return (
            unbroadcast(g, a.shape) if needs[0] else None,
            unbroadcast(g, b.shape) if needs[1] else None,
        )

    return record("add", a.data + b.data, (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)

    def vjp(g, needs):
        return (
            unbroadcast(g, a.shape) if needs[0] else None,
            unbroadcast(-g, b.shape) if needs[1] else None,
        )

    return record("sub", a.data - b.data, (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)

    def vjp(g, needs):
        return (
            unbroadcast(g * b.data, a.shape) if needs[0] else None,
            unbroadcast(g * a.data, b.shape) if needs[1] else None,
        )

    return record("mul", a.data * b.data, (a, b), vjp)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("div", a, b)
    out = a.data / b.data

    def vjp(g, needs):
        return (
            unbroadcast(g / b.data, a.shape) if needs[0] else None,
            unbroadcast(-g * out / b.data, b.shape) if needs[1] else None,
        )

    return record("div", out, (a, b), vjp)


def neg(x) -> Tensor:
    x = as_tensor(x)
    return record("neg", -x.data, (x,), lambda g, needs: (-g,))


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return record("exp", out, (x,), lambda g, needs: (g * out,))


def log(x) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data <= 0):
        # 交给 record 的有限性检查报告
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(x.data)
    else:
        out = np.log(x.data)
    return record("log", out, (x,), lambda g, needs: (g / x.data,))


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    with np.errstate(invalid="ignore"):
        out = np.sqrt(x.data)
    return record("sqrt", out, (x,), lambda g, needs: (g * 0.5 / out,))


def absolute(x) -> Tensor:
    x = as_tensor(x)
    return record("abs", np.abs(x.data), (x,), lambda g, needs: (g * np.sign(x.data),))


def square(x) -> Tensor:
    x = as_tensor(x)
    return record("square", x.data * x.data, (x,), lambda g, needs: (2.0 * g * x.data,))


def pow_scalar(x, exponent: float) -> Tensor:
    x = as_tensor(x)
    out = np.power(x.data, exponent)
    return record(
        "pow", out, (x,), lambda g, needs: (g * exponent * np.power(x.data, exponent - 1),)
    )


# ---------------------------------------------------------------------------
# 激活函数
# ---------------------------------------------------------------------------


def leaky_relu(x, slope: float = 0.2) -> Tensor:
    x = as_tensor(x)
    positive = x.data > 0
    out = np.where(positive, x.data, slope * x.data).astype(x.dtype)
    factor = np.where(positive, 1.0, slope).astype(x.dtype)
    return record("leaky_relu", out, (x,), lambda g, needs: (g * factor,))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    # tanh 形式避免大负数时 exp 溢出
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return record("sigmoid", out, (x,), lambda g, needs: (g * out * (1.0 - out),))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return record("tanh", out, (x,), lambda g, needs: (g * (1.0 - out * out),))


def softplus(x) -> Tensor:
    x = as_tensor(x)
    out = np.logaddexp(0.0, x.data).astype(x.dtype)

    def vjp(g, needs):
        return (g * 0.5 * (1.0 + np.tanh(0.5 * x.data)),)

    return record("softplus", out, (x,), vjp)


# ---------------------------------------------------------------------------
# 归约
# ---------------------------------------------------------------------------


def _normalize_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    for a in axis:
        if not -ndim <= a < ndim:
            raise ContractError(f"轴 {a} 超出维度 {ndim}")
    return tuple(a % ndim for a in axis)


def _expand_back(g: np.ndarray, axes: Tuple[int, ...], keepdims: bool) -> np.ndarray:
    if keepdims:
        return g
    for a in sorted(axes):
        g = np.expand_dims(g, a)
    return g


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def vjp(g, needs):
        return (np.broadcast_to(_expand_back(g, axes, keepdims), x.shape).copy(),)

    return record("sum", np.asarray(out, dtype=x.dtype), (x,), vjp)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    if count == 0:
        raise ContractError("mean: 对空张量求均值")
    out = x.data.mean(axis=axes, keepdims=keepdims)

    def vjp(g, needs):
        return (np.broadcast_to(_expand_back(g, axes, keepdims) / count, x.shape).copy(),)

    return record("mean", np.asarray(out, dtype=x.dtype), (x,), vjp)


def _extremum(op: str, reducer, x, axis, keepdims: bool) -> Tensor:
    x = as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    if x.size == 0:
        raise ContractError(f"{op}: 空张量")
    kept = reducer(x.data, axis=axes, keepdims=True)
    hit = (x.data == kept).astype(x.dtype)
    # 并列极值平分梯度
    hit = hit / hit.sum(axis=axes, keepdims=True)
    out = kept if keepdims else np.squeeze(kept, axis=axes)

    def vjp(g, needs):
        return (_expand_back(g, axes, keepdims) * hit,)

    return record(op, np.asarray(out, dtype=x.dtype), (x,), vjp)


def amax(x, axis=None, keepdims: bool = False) -> Tensor:
    return _extremum("amax", np.max, x, axis, keepdims)


def amin(x, axis=None, keepdims: bool = False) -> Tensor:
    return _extremum("amin", np.min, x, axis, keepdims)


# ---------------------------------------------------------------------------
# 形状运算
# ---------------------------------------------------------------------------


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError:
        raise ContractError(f"reshape: 无法把 {x.shape} 变为 {tuple(shape)}")
    return record("reshape", out, (x,), lambda g, needs: (g.reshape(x.shape),))


def transpose(x, axes: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ContractError(f"transpose: 轴排列 {axes} 与维度 {x.ndim} 不符")
    inverse = tuple(np.argsort(axes))
    return record(
        "transpose", x.data.transpose(axes), (x,), lambda g, needs: (g.transpose(inverse),)
    )


def concat(tensors: Sequence, axis: int = 1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("concat: 输入为空")
    ndim = tensors[0].ndim
    axis = _normalize_axes(axis, ndim)[0]
    for t in tensors:
        if t.ndim != ndim or any(
            t.shape[d] != tensors[0].shape[d] for d in range(ndim) if d != axis
        ):
            raise ContractError(
                f"concat: 形状不匹配 {[t.shape for t in tensors]}（轴 {axis}）"
            )
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def vjp(g, needs):
        return tuple(
            np.take(g, range(bounds[i], bounds[i + 1]), axis=axis) if need else None
            for i, need in enumerate(needs)
        )

    return record("concat", np.concatenate([t.data for t in tensors], axis=axis), tensors, vjp)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("stack: 输入为空")
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise ContractError(f"stack: 形状不一致 {sorted(shapes)}")
    out = np.stack([t.data for t in tensors], axis=axis)
    axis = axis % out.ndim

    def vjp(g, needs):
        return tuple(
            np.take(g, i, axis=axis) if need else None for i, need in enumerate(needs)
        )

    return record("stack", out, tensors, vjp)


def getitem(x, index) -> Tensor:
    x = as_tensor(x)
    out = x.data[index]

    def vjp(g, needs):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)

    return record("getitem", np.array(out, dtype=x.dtype), (x,), vjp)


def broadcast_to(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    shape = tuple(shape)
    try:
        out = np.broadcast_to(x.data, shape).copy()
    except ValueError:
        raise ContractError(f"broadcast_to: 无法把 {x.shape} 广播到 {shape}")
    return record("broadcast_to", out, (x,), lambda g, needs: (unbroadcast(g, x.shape),))


# ---------------------------------------------------------------------------
# 张量缩并
# ---------------------------------------------------------------------------


def _parse_subscripts(subscripts: str, count: int) -> Tuple[List[str], str]:
    spec = subscripts.replace(" ", "")
    if "->" not in spec or "." in spec:
        raise ContractError(f"einsum: 需要显式输出且不支持省略号: {subscripts}")
    lhs, rhs = spec.split("->")
    parts = lhs.split(",")
    if len(parts) != count:
        raise ContractError(f"einsum: 下标 {subscripts} 与 {count} 个操作数不符")
    for p in parts + [rhs]:
        if len(set(p)) != len(p):
            raise ContractError(f"einsum: 不支持重复下标（对角线）: {subscripts}")
    return parts, rhs


def einsum(subscripts: str, *operands) -> Tensor:
    """
    一到两个操作数的 einsum.

    梯度按 grad_i = einsum(out, 其他操作数 -> sub_i) 计算，因此每个操作数的下标
    必须出现在输出或另一个操作数中.
    """
    operands = [as_tensor(o) for o in operands]
    if len(operands) not in (1, 2):
        raise ContractError("einsum: 只支持一到两个操作数")
    parts, rhs = _parse_subscripts(subscripts, len(operands))
    for i, part in enumerate(parts):
        if len(part) != operands[i].ndim:
            raise ContractError(
                f"einsum: 下标 {part} 与操作数形状 {operands[i].shape} 维数不符"
            )
        others = rhs + "".join(p for j, p in enumerate(parts) if j != i)
        missing = set(part) - set(others)
        if missing:
            raise ContractError(f"einsum: 下标 {sorted(missing)} 只在单个操作数中出现")
    out = np.einsum(subscripts, *[o.data for o in operands], optimize=True)

    def vjp(g, needs):
        grads = []
        for i, need in enumerate(needs):
            if not need:
                grads.append(None)
                continue
            other_parts = [p for j, p in enumerate(parts) if j != i]
            other_data = [o.data for j, o in enumerate(operands) if j != i]
            expr = ",".join([rhs] + other_parts) + "->" + parts[i]
            grads.append(np.einsum(expr, g, *other_data, optimize=True))
        return tuple(grads)

    return record("einsum", np.asarray(out, dtype=operands[0].dtype), operands, vjp)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ContractError(f"matmul: 形状不匹配 {a.shape} @ {b.shape}")
    letters = string.ascii_lowercase[: a.ndim - 1]
    return einsum(f"{letters}y,yz->{letters}z", a, b)


# ---------------------------------------------------------------------------
# 卷积
# ---------------------------------------------------------------------------


def _as_tuple(value: IntOrTuple, n: int) -> Tuple[int, ...]:
    if isinstance(value, int):
        return (value,) * n
    value = tuple(int(v) for v in value)
    if len(value) != n:
        raise ContractError(f"参数 {value} 需要 {n} 个分量")
    return value


def conv_nd(
    x, weight, bias=None, stride: IntOrTuple = 1, pad: IntOrTuple = 0, op: str = "conv"
) -> Tensor:
    """
    N 维互相关.

    Args:
        x: [B, Cin, *S]
        weight: [Cout, Cin, *k]，k 为奇数
        bias: 可选 [Cout]
        stride: 步长
        pad: 零填充宽度

    Returns:
        Tensor: [B, Cout, *S']
    """
    x, weight = as_tensor(x), as_tensor(weight)
    n = x.ndim - 2
    if n < 1 or weight.ndim != n + 2:
        raise ContractError(f"{op}: 输入 {x.shape} 与权重 {weight.shape} 维数不符")
    if x.shape[1] != weight.shape[1]:
        raise ContractError(
            f"{op}: 输入通道 {x.shape[1]} 与权重输入通道 {weight.shape[1]} 不一致"
        )
    kernel = weight.shape[2:]
    if any(k % 2 == 0 for k in kernel):
        raise ContractError(f"{op}: 卷积核尺寸必须为奇数，实际 {kernel}")
    strides = _as_tuple(stride, n)
    pads = _as_tuple(pad, n)
    spatial = x.shape[2:]
    out_spatial = tuple((s + 2 * p - k) // st + 1 for s, p, k, st in zip(spatial, pads, kernel, strides))
    if any(o < 1 for o in out_spatial):
        raise ContractError(f"{op}: 输入 {spatial} 过小，无法容纳卷积核 {kernel}")
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[0],):
            raise ContractError(f"{op}: 偏置形状 {bias.shape} 应为 ({weight.shape[0]},)")

    spatial_axes = tuple(range(2, 2 + n))
    xp = np.pad(x.data, [(0, 0), (0, 0)] + [(p, p) for p in pads])
    windows = sliding_window_view(xp, kernel, axis=spatial_axes)
    slicer = (slice(None), slice(None)) + tuple(
        slice(0, o * st, st) for o, st in zip(out_spatial, strides)
    )
    windows = windows[slicer]
    # windows: [B, Cin, *S', *k]
    win_axes = [1] + list(range(2 + n, 2 + 2 * n))
    out = np.tensordot(windows, weight.data, axes=(win_axes, [1] + list(range(2, 2 + n))))
    out = np.moveaxis(out, -1, 1)
    if bias is not None:
        out = out + bias.data.reshape((1, -1) + (1,) * n)

    inputs = (x, weight) if bias is None else (x, weight, bias)

    def vjp(g, needs):
        gx = gw = gb = None
        if needs[1]:
            gw = np.tensordot(g, windows, axes=([0] + list(spatial_axes), [0] + list(spatial_axes)))
        if needs[0]:
            gxp = np.zeros_like(xp)
            for tap in np.ndindex(*kernel):
                w_tap = weight.data[(slice(None), slice(None)) + tap]
                contrib = np.moveaxis(np.tensordot(g, w_tap, axes=([1], [0])), -1, 1)
                region = (slice(None), slice(None)) + tuple(
                    slice(t, t + o * st, st) for t, o, st in zip(tap, out_spatial, strides)
                )
                gxp[region] += contrib
            crop = (slice(None), slice(None)) + tuple(
                slice(p, p + s) for p, s in zip(pads, spatial)
            )
            gx = gxp[crop]
        if len(needs) == 3 and needs[2]:
            gb = g.sum(axis=(0,) + spatial_axes)
        return (gx, gw, gb)[: len(needs)]

    return record(op, np.asarray(out, dtype=x.dtype), inputs, vjp)


def conv2d(x, weight, bias=None, stride: IntOrTuple = 1, pad: IntOrTuple = 0) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 4:
        raise ContractError(f"conv2d: 输入需为 [B,C,H,W]，实际 {x.shape}")
    return conv_nd(x, weight, bias, stride, pad, op="conv2d")


def conv3d(x, weight, bias=None, stride: IntOrTuple = 1, pad: IntOrTuple = 0) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 5:
        raise ContractError(f"conv3d: 输入需为 [B,C,T,H,W]，实际 {x.shape}")
    return conv_nd(x, weight, bias, stride, pad, op="conv3d")


# ---------------------------------------------------------------------------
# 采样与池化
# ---------------------------------------------------------------------------


def upsample_nearest(x, factor: int = 2) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 4:
        raise ContractError(f"upsample_nearest: 输入需为 [B,C,H,W]，实际 {x.shape}")
    out = np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3)
    b, c, h, w = x.shape

    def vjp(g, needs):
        return (g.reshape(b, c, h, factor, w, factor).sum(axis=(3, 5)),)

    return record("upsample_nearest", out, (x,), vjp)


def avg_pool2d(x, factor: int) -> Tensor:
    x = as_tensor(x)
    if factor == 1:
        return x
    b, c, h, w = x.shape
    if h % factor or w % factor:
        raise ContractError(f"avg_pool2d: 尺寸 {h}x{w} 不能被 {factor} 整除")
    out = x.data.reshape(b, c, h // factor, factor, w // factor, factor).mean(axis=(3, 5))

    def vjp(g, needs):
        g = np.repeat(np.repeat(g, factor, axis=2), factor, axis=3)
        return (g / (factor * factor),)

    return record("avg_pool2d", out.astype(x.dtype), (x,), vjp)


def avg_pool_global(x) -> Tensor:
    """对所有空间轴取平均: [B,C,*S] -> [B,C]."""
    x = as_tensor(x)
    if x.ndim < 3:
        raise ContractError(f"avg_pool_global: 输入需带空间轴，实际 {x.shape}")
    return mean(x, axis=tuple(range(2, x.ndim)))
