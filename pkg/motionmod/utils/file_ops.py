#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
文件操作工具 暂存目录、原子替换与目录清理.
"""

import os
import shutil
from pathlib import Path
from typing import Union

from ..core.errors import DataIOError

PathLike = Union[str, Path]

STAGING_SUFFIX = ".staging"


class FileOperations:
    """
    文件操作工具类.
    """

    def ensure_dir(self, dir_path: PathLike) -> Path:
        """确保目录存在，不存在则创建.

        Raises:
            DataIOError: 目录无法创建
        """
        path = Path(dir_path)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DataIOError(f"无法创建目录 {path}: {e}")
        return path

    def staging_dir(self, target: PathLike) -> Path:
        """为 target 创建同级暂存目录（已存在则先清空）."""
        target = Path(target)
        staging = target.with_name(target.name + STAGING_SUFFIX)
        self.remove_dir(staging)
        return self.ensure_dir(staging)

    def commit_staging(self, staging: PathLike, target: PathLike) -> Path:
        """用暂存目录替换 target.

        Raises:
            DataIOError: 替换失败
        """
        staging, target = Path(staging), Path(target)
        try:
            if target.exists():
                shutil.rmtree(target)
            os.replace(staging, target)
        except OSError as e:
            raise DataIOError(f"无法把 {staging} 提交为 {target}: {e}")
        return target

    def remove_dir(self, dir_path: PathLike) -> None:
        path = Path(dir_path)
        if path.exists():
            try:
                shutil.rmtree(path)
            except OSError as e:
                raise DataIOError(f"无法删除目录 {path}: {e}")

    def cleanup_temp_dir(self, temp_dir: PathLike) -> bool:
        """清理临时目录，失败时返回 False 而不抛出."""
        try:
            self.remove_dir(temp_dir)
            return True
        except DataIOError:
            return False
