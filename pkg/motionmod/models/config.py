#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
网络结构配置与消融开关.
"""

from dataclasses import asdict, dataclass, field, fields
from typing import Dict, Tuple

from ..core.errors import ConfigError


@dataclass
class AblationFlags:
    """消融开关；全部为 False 时即完整模型."""

    no_dmm: bool = False
    no_dcn: bool = False
    no_style: bool = False
    no_mask: bool = False
    no_forward: bool = False
    no_backward: bool = False
    no_concat: bool = False
    no_structural_recurrence: bool = False

    @classmethod
    def names(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def active(self) -> Tuple[str, ...]:
        return tuple(name for name in self.names() if getattr(self, name))

    def label(self) -> str:
        active = self.active()
        return "full" if not active else "+".join(active)


@dataclass
class ArchConfig:
    """生成器与判别器的结构超参数."""

    resolution: int = 64
    window: int = 8
    d_style: int = 64
    keypoints: int = 5
    level_channels: Tuple[int, ...] = (128, 64, 32)
    branch_channels: int = 32
    max_offset: float = 8.0
    kernel: int = 3
    demod_eps: float = 1e-8
    leaky_slope: float = 0.2
    temporal_clip: int = 4
    flags: AblationFlags = field(default_factory=AblationFlags)

    def __post_init__(self):
        self.level_channels = tuple(int(c) for c in self.level_channels)
        if self.resolution < 8 or self.resolution % 8:
            raise ConfigError(f"resolution 必须是 8 的倍数且不小于 8，实际 {self.resolution}")
        if len(self.level_channels) != 3:
            raise ConfigError(f"level_channels 需要 3 个解码层宽度，实际 {self.level_channels}")
        if self.kernel % 2 == 0:
            raise ConfigError(f"kernel 必须为奇数，实际 {self.kernel}")
        if self.flags.no_forward and self.flags.no_backward:
            raise ConfigError("no_forward 与 no_backward 不能同时开启")

    def fingerprint_payload(self) -> Dict:
        """参与架构哈希的字段."""
        payload = asdict(self)
        payload["level_channels"] = list(self.level_channels)
        payload.pop("window")
        return payload
