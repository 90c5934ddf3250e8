#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
DMMT 张量文件与检查点读写.

DMMT 记录: b"DMMT" | u8 版本(1) | u8 精度(0=f32, 1=f64) | u32 维数 | 维数×u32 尺寸 |
小端行优先数据. 检查点: u32 条目数，随后每条为 u32 名称长度 | UTF-8 名称 | DMMT 记录.
"""

import os
import struct
from pathlib import Path
from typing import Dict, Mapping, Tuple, Union

import numpy as np

from ..core.errors import DataIOError

MAGIC = b"DMMT"
VERSION = 1
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}

PathLike = Union[str, Path]


def encode_tensor(array: np.ndarray) -> bytes:
    """把数组编码为一条 DMMT 记录."""
    array = np.asarray(array)
    if array.dtype not in _CODES:
        array = array.astype(np.float64)
    code = _CODES[array.dtype]
    header = MAGIC + struct.pack("<BBI", VERSION, code, array.ndim)
    header += struct.pack(f"<{array.ndim}I", *array.shape)
    payload = np.ascontiguousarray(array, dtype=_DTYPES[code]).tobytes(order="C")
    return header + payload


def decode_tensor(buffer: bytes, offset: int = 0) -> Tuple[np.ndarray, int]:
    """
    从 buffer[offset:] 解码一条 DMMT 记录.

    Returns:
        (数组, 记录之后的偏移)
    """
    try:
        if buffer[offset: offset + 4] != MAGIC:
            raise DataIOError(f"DMMT 魔数错误（偏移 {offset}）")
        version, code, ndim = struct.unpack_from("<BBI", buffer, offset + 4)
        if version != VERSION:
            raise DataIOError(f"不支持的 DMMT 版本: {version}")
        if code not in _DTYPES:
            raise DataIOError(f"未知的 DMMT 精度代码: {code}")
        cursor = offset + 10
        shape = struct.unpack_from(f"<{ndim}I", buffer, cursor)
        cursor += 4 * ndim
        dtype = _DTYPES[code]
        count = int(np.prod(shape)) if ndim else 1
        nbytes = count * dtype.itemsize
        if cursor + nbytes > len(buffer):
            raise DataIOError("DMMT 数据被截断")
        array = np.frombuffer(buffer, dtype=dtype, count=count, offset=cursor).reshape(shape)
        return array.astype(dtype.newbyteorder("="), copy=True), cursor + nbytes
    except struct.error as e:
        raise DataIOError(f"DMMT 头部损坏: {e}")


def _atomic_write(path: PathLike, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as e:
        raise DataIOError(f"无法写入 {path}: {e}")


def _read(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise DataIOError(f"无法读取 {path}: {e}")


def save_tensor(path: PathLike, array: np.ndarray) -> None:
    _atomic_write(path, encode_tensor(array))


def load_tensor(path: PathLike) -> np.ndarray:
    buffer = _read(path)
    array, end = decode_tensor(buffer)
    if end != len(buffer):
        raise DataIOError(f"{path} 含有多余数据")
    return array


def encode_checkpoint(entries: Mapping[str, np.ndarray]) -> bytes:
    chunks = [struct.pack("<I", len(entries))]
    for name, array in entries.items():
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)) + raw + encode_tensor(array))
    return b"".join(chunks)


def decode_checkpoint(buffer: bytes) -> Dict[str, np.ndarray]:
    try:
        (count,) = struct.unpack_from("<I", buffer, 0)
        cursor = 4
        entries: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (length,) = struct.unpack_from("<I", buffer, cursor)
            cursor += 4
            name = buffer[cursor: cursor + length].decode("utf-8")
            cursor += length
            entries[name], cursor = decode_tensor(buffer, cursor)
    except (struct.error, UnicodeDecodeError) as e:
        raise DataIOError(f"检查点损坏: {e}")
    if cursor != len(buffer):
        raise DataIOError("检查点末尾含有多余数据")
    return entries


def save_checkpoint(path: PathLike, entries: Mapping[str, np.ndarray]) -> None:
    """按给定顺序写出检查点条目."""
    _atomic_write(path, encode_checkpoint(entries))


def load_checkpoint(path: PathLike) -> Dict[str, np.ndarray]:
    return decode_checkpoint(_read(path))
