#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
配置指纹: 对排序后的 JSON 求 SHA256.
"""

import hashlib
import json
from typing import Any, Dict


def calculate_config_hash(payload: Dict[str, Any]) -> str:
    """计算配置字典的 SHA256 十六进制摘要.

    Args:
        payload: 只含可 JSON 序列化值的字典

    Returns:
        str: 64 位十六进制哈希
    """
    content = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(content.encode("utf-8")).hexdigest()
