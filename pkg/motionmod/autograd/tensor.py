#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
张量与反向模式自动微分磁带.

每个可微运算在产出结果后调用 record()，把 (输入, 输出, VJP) 追加到当前线程
活动的 Tape；backward() 按执行顺序的逆序回放磁带并累积梯度.
"""

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import ContractError, NumericalError

_DTYPES = {"f32": np.float32, "f64": np.float64}
_default_dtype = np.float32


def set_default_dtype(name: str) -> None:
    """设置全局默认精度 ("f32" 或 "f64")."""
    global _default_dtype
    if name not in _DTYPES:
        raise ContractError(f"不支持的精度: {name}，可选 f32/f64")
    _default_dtype = _DTYPES[name]


def get_default_dtype():
    return _default_dtype


def dtype_name(dtype) -> str:
    return "f64" if np.dtype(dtype) == np.float64 else "f32"


@contextmanager
def default_dtype(name: str):
    """临时切换默认精度."""
    global _default_dtype
    previous = _default_dtype
    set_default_dtype(name)
    try:
        yield
    finally:
        _default_dtype = previous


class Tensor:
    """
    稠密 N 维张量.

    Args:
        data: 数组或标量
        requires_grad: 是否为需要梯度的叶子
        name: 可选名称（调试与检查点使用）
        dtype: 覆盖默认精度
    """

    __slots__ = ("data", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None, dtype=None):
        target = dtype if dtype is not None else _default_dtype
        self.data = np.ascontiguousarray(np.asarray(data, dtype=target))
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def _wrap(cls, array: np.ndarray) -> "Tensor":
        """包装运算结果，不再转换精度."""
        obj = cls.__new__(cls)
        obj.data = array
        obj.requires_grad = False
        obj.name = None
        return obj

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() 需要单元素张量，实际形状 {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data)

    def __len__(self) -> int:
        return self.data.shape[0]

    def __hash__(self) -> int:
        return id(self)

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={dtype_name(self.dtype)}{label})"

    # 运算符重载委托给 ops 模块
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __getitem__(self, index):
        from . import ops
        return ops.getitem(self, index)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)


class Parameter(Tensor):
    """可训练参数."""

    __slots__ = ()

    def __init__(self, data, name: Optional[str] = None, dtype=None):
        super().__init__(data, requires_grad=True, name=name, dtype=dtype)


VJP = Callable[[np.ndarray, Tuple[bool, ...]], Sequence[Optional[np.ndarray]]]


@dataclass
class TapeEntry:
    """磁带上的一条运算记录."""

    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    vjp: VJP
    needs: Tuple[bool, ...]


_local = threading.local()


def _stack() -> List[Optional["Tape"]]:
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


def active_tape() -> Optional["Tape"]:
    stack = _stack()
    return stack[-1] if stack else None


class Tape:
    """
    运算磁带；作为上下文管理器使用，可重复进入以继续记录.
    """

    def __init__(self, name: str = "tape"):
        self.name = name
        self.entries: List[TapeEntry] = []
        # 被记录过的输出张量，用于判断下游输入是否依赖参数
        self._tracked: Dict[int, Tensor] = {}

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _stack().pop()

    def __len__(self) -> int:
        return len(self.entries)

    def tracks(self, tensor: Tensor) -> bool:
        return tensor.requires_grad or id(tensor) in self._tracked

    def append(self, entry: TapeEntry) -> None:
        self.entries.append(entry)
        self._tracked[id(entry.output)] = entry.output

    def clear(self) -> None:
        self.entries.clear()
        self._tracked.clear()


@contextmanager
def no_grad():
    """在该上下文中运算不被记录."""
    _stack().append(None)
    try:
        yield
    finally:
        _stack().pop()


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def record(op: str, out: np.ndarray, inputs: Iterable[Tensor], vjp: VJP) -> Tensor:
    """
    登记一次运算结果.

    Args:
        op: 运算名（报错时使用）
        out: 结果数组
        inputs: 输入张量
        vjp: vjp(grad_out, needs) -> 每个输入的梯度（不需要的位置返回 None）

    Returns:
        Tensor: 包装后的结果
    """
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"运算 {op} 产生了 NaN/Inf", op=op)
    result = Tensor._wrap(np.ascontiguousarray(out))
    tape = active_tape()
    if tape is None:
        return result
    inputs = tuple(inputs)
    needs = tuple(tape.tracks(t) for t in inputs)
    if any(needs):
        tape.append(TapeEntry(op, inputs, result, vjp, needs))
    return result


def backward(loss: Tensor, tape: Tape, params: Optional[Sequence[Tensor]] = None) -> Dict[Tensor, np.ndarray]:
    """
    沿磁带反向传播.

    Args:
        loss: 标量损失
        tape: 记录了 loss 全部历史的磁带
        params: 需要返回梯度的参数；未被读取的参数得到零梯度

    Returns:
        Dict[Tensor, np.ndarray]: 叶子张量 -> 梯度
    """
    if loss.data.size != 1:
        raise ContractError(f"backward 需要标量损失，实际形状 {loss.shape}")
    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: Dict[int, Tensor] = {}

    for entry in reversed(tape.entries):
        g_out = grads.pop(id(entry.output), None)
        if g_out is None:
            continue
        g_inputs = entry.vjp(g_out, entry.needs)
        for tensor, need, g in zip(entry.inputs, entry.needs, g_inputs):
            if not need or g is None:
                continue
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = np.asarray(g, dtype=tensor.dtype)
            if tensor.requires_grad:
                leaves[key] = tensor

    if loss.requires_grad:
        leaves[id(loss)] = loss

    result: Dict[Tensor, np.ndarray] = {}
    for key, tensor in leaves.items():
        result[tensor] = grads.get(key, np.zeros_like(tensor.data))
    if params is not None:
        for p in params:
            if p not in result:
                result[p] = np.zeros_like(p.data)
    return result
