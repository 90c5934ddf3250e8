#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
配置管理系统 处理 key=value 配置文件的加载、合并、校验与序列化.
"""

from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from .errors import ConfigError

PathLike = Union[str, Path]

PRECISIONS = ("f32", "f64")


@dataclass
class RunConfig:
    """
    一次运行的全部配置；默认值即 `configs/default.cfg`.
    """

    seed: int = 0
    resolution: int = 64
    window: int = 8
    batch_size: int = 2
    iterations: int = 2000
    checkpoint_interval: int = 500
    precision: str = "f32"
    dataset: str = "data/sprites"
    output_dir: str = "runs/default"

    # 合成数据
    n_train: int = 200
    n_test: int = 40
    train_seq_len: int = 32
    test_seq_len: int = 32
    p_drop: float = 0.15
    sigma_jitter: float = 1.0
    occlusion: bool = False

    # 优化器
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8

    # 结构
    leaky_slope: float = 0.2
    d_style: int = 64
    branch_channels: int = 32
    level_channels: Tuple[int, ...] = (128, 64, 32)
    max_offset: float = 8.0
    demod_eps: float = 1e-8
    temporal_clip: int = 4

    # 损失
    lambda_adv: float = 5.0
    lambda_temp: float = 5.0
    lambda_l1: float = 2.0
    lambda_per: float = 500.0
    lambda_gram: float = 0.5
    lambda_cx: float = 0.1
    gan_form: str = "lsgan"
    cx_h: float = 0.5
    cx_max_samples: int = 256

    # 评估 / 消融 / 渲染
    eval_repetitions: int = 5
    eval_clips_per_sequence: int = 4
    ablate_seeds: int = 3
    ablate_extended: bool = False
    render_pixel: Tuple[int, ...] = (32, 32)

    # 消融开关
    no_dmm: bool = False
    no_dcn: bool = False
    no_style: bool = False
    no_mask: bool = False
    no_forward: bool = False
    no_backward: bool = False
    no_concat: bool = False
    no_structural_recurrence: bool = False

    def __post_init__(self):
        self.level_channels = tuple(int(c) for c in self.level_channels)
        self.render_pixel = tuple(int(c) for c in self.render_pixel)
        self.validate()

    def validate(self) -> None:
        """校验取值范围，收集全部问题后一次性报告."""
        errors = []
        if self.window < 2 or self.window % 2:
            errors.append(f"window 必须是不小于 2 的偶数，实际 {self.window}")
        for key in ("train_seq_len", "test_seq_len"):
            value = getattr(self, key)
            if value % 2 or value < self.window:
                errors.append(f"{key} 必须是偶数且不小于 window={self.window}，实际 {value}")
        if self.resolution < 8 or self.resolution % 8:
            errors.append(f"resolution 必须是 8 的倍数，实际 {self.resolution}")
        if self.precision not in PRECISIONS:
            errors.append(f"precision 只能是 {'/'.join(PRECISIONS)}，实际 {self.precision}")
        if self.gan_form not in ("lsgan", "log"):
            errors.append(f"gan_form 只能是 lsgan/log，实际 {self.gan_form}")
        for key in ("batch_size", "iterations", "checkpoint_interval", "n_train", "d_style",
                    "branch_channels", "cx_max_samples", "eval_repetitions",
                    "eval_clips_per_sequence", "ablate_seeds"):
            if getattr(self, key) < 1:
                errors.append(f"{key} 必须为正整数，实际 {getattr(self, key)}")
        if self.n_test < 0:
            errors.append(f"n_test 不能为负，实际 {self.n_test}")
        if not 0.0 <= self.p_drop <= 1.0:
            errors.append(f"p_drop 必须在 [0,1] 内，实际 {self.p_drop}")
        for key in ("sigma_jitter", "lambda_adv", "lambda_temp", "lambda_l1", "lambda_per",
                    "lambda_gram", "lambda_cx"):
            if getattr(self, key) < 0:
                errors.append(f"{key} 不能为负，实际 {getattr(self, key)}")
        for key in ("lr", "adam_eps", "demod_eps", "cx_h", "max_offset"):
            if getattr(self, key) <= 0:
                errors.append(f"{key} 必须为正，实际 {getattr(self, key)}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            errors.append(f"beta1/beta2 必须在 [0,1) 内，实际 {self.beta1}/{self.beta2}")
        if not 2 <= self.temporal_clip <= self.window:
            errors.append(f"temporal_clip 必须在 [2, window] 内，实际 {self.temporal_clip}")
        if len(self.level_channels) != 3 or min(self.level_channels) < 1:
            errors.append(f"level_channels 需要 3 个正整数，实际 {self.level_channels}")
        if len(self.render_pixel) != 2 or not all(0 <= c < self.resolution for c in self.render_pixel):
            errors.append(f"render_pixel 需要画布内的 x,y，实际 {self.render_pixel}")
        if self.no_forward and self.no_backward:
            errors.append("no_forward 与 no_backward 不能同时开启")
        if errors:
            raise ConfigError(f"配置验证失败: {'; '.join(errors)}")

    def flags(self):
        from ..models.config import AblationFlags

        return AblationFlags(**{name: getattr(self, name) for name in AblationFlags.names()})

    def arch(self):
        from ..models.config import ArchConfig

        return ArchConfig(
            resolution=self.resolution,
            window=self.window,
            d_style=self.d_style,
            level_channels=self.level_channels,
            branch_channels=self.branch_channels,
            max_offset=self.max_offset,
            demod_eps=self.demod_eps,
            leaky_slope=self.leaky_slope,
            temporal_clip=self.temporal_clip,
            flags=self.flags(),
        )

    def loss_weights(self):
        from ..losses import LossWeights

        return LossWeights(
            adv=self.lambda_adv, temp=self.lambda_temp, l1=self.lambda_l1,
            per=self.lambda_per, gram=self.lambda_gram, cx=self.lambda_cx,
        )

    def replace(self, **changes) -> "RunConfig":
        values = asdict(self)
        values.update(changes)
        return RunConfig(**values)


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
TUPLE_KEYS = {name for name, value in asdict(RunConfig()).items() if isinstance(value, tuple)}


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def coerce_value(key: str, raw: Any) -> Any:
    """把字符串（或命令行已解析的值）转换为字段类型."""
    if key not in FIELD_TYPES:
        raise ConfigError(f"未知的配置项: {key}")
    default = getattr(RunConfig, key, None)
    if key in TUPLE_KEYS:
        if isinstance(raw, (tuple, list)):
            return tuple(int(v) for v in raw)
        try:
            return tuple(int(v) for v in str(raw).split(",") if v.strip())
        except ValueError:
            raise ConfigError(f"{key} 需要逗号分隔的整数，实际 {raw!r}")
    if isinstance(default, bool):
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ("true", "1", "yes", "on"):
            return True
        if text in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key} 需要布尔值 true/false，实际 {raw!r}")
    try:
        if isinstance(default, int):
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} 的取值无效: {raw!r}")
    return str(raw)


def parse_config_text(text: str, source: str = "<text>") -> Dict[str, Any]:
    """
    解析 key=value 文本；'#' 开头为注释，重复键与未知键均报错.

    Returns:
        Dict[str, Any]: 已转换类型的配置项
    """
    values: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{lineno}: 缺少 '='，无法解析: {line!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: 重复的配置项 {key}")
        values[key] = coerce_value(key, raw.strip())
    return values


def serialize_config(config: RunConfig) -> str:
    lines = ["# motionmod 运行配置"]
    lines += [f"{key}={format_value(value)}" for key, value in asdict(config).items()]
    return "\n".join(lines) + "\n"


def load_config_file(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"配置文件不存在: {path}")
    try:
        text = path.read_text(encoding="utf-8-sig")
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"加载配置文件失败: {e}")
    return parse_config_text(text, str(path))


class ConfigManager:
    """
    配置管理器，合并优先级: 命令行参数 > 配置文件 > 默认配置.
    """

    def __init__(self, config_path: Optional[PathLike] = None, args: Optional[Dict[str, Any]] = None):
        """初始化配置管理器.

        Args:
            config_path: 配置文件路径
            args: 命令行参数字典；值为 None 的项视为未指定
        """
        self.config_path = config_path
        self.args = args or {}
        self.raw_config: Dict[str, Any] = load_config_file(config_path) if config_path else {}
        self.merged_config = self._merge_all_configs()
        self.config = RunConfig(**self.merged_config)

    def _merge_all_configs(self) -> Dict[str, Any]:
        merged = asdict(RunConfig())
        merged.update(self.raw_config)
        merged.update(self._args_to_config(self.args))
        return merged

    @staticmethod
    def _args_to_config(args: Dict[str, Any]) -> Dict[str, Any]:
        """只取与配置项同名且给出了值的命令行参数."""
        config = {}
        for key, value in args.items():
            if key in FIELD_TYPES and value is not None:
                # 消融开关在命令行上是 store_true，未给出时为 False，不覆盖文件
                if isinstance(getattr(RunConfig, key, None), bool) and value is False:
                    continue
                config[key] = coerce_value(key, value)
        return config

    def get(self, key: str, default: Any = None) -> Any:
        return self.merged_config.get(key, default)

    def save_merged_config(self, output_path: PathLike) -> Path:
        path = Path(output_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(serialize_config(self.config), encoding="utf-8")
        return path
