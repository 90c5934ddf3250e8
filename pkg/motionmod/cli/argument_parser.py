#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
命令行参数解析器
负责解析子命令与参数；与配置项同名的参数默认为 None，交给 ConfigManager 合并
"""

import argparse
from typing import Any, Optional, Sequence

from ..core.config import PRECISIONS

COMMANDS = ("gen-data", "train", "eval", "gradcheck", "render", "ablate")

ABLATION_FLAGS = (
    ("--no-dmm", "普通卷积代替 DMM"),
    ("--no-dcn", "关闭可变形采样（零偏移、单位掩码）"),
    ("--no-style", "关闭风格调制与解调"),
    ("--no-mask", "掩码恒为 1"),
    ("--no-forward", "去掉前向传播分支"),
    ("--no-backward", "去掉后向传播分支"),
    ("--no-concat", "循环融合用相加代替拼接"),
    ("--no-structural-recurrence", "结构编码器不使用前一时刻状态"),
)


class ArgumentParser:
    """
    motionmod 命令行参数解析器.
    """

    @staticmethod
    def build_parser() -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog="motionmod",
            description="motionmod - 可变形运动调制（DMM）视频生成",
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog="""
示例用法:
  motionmod gen-data --config configs/default.cfg
  motionmod train --config configs/default.cfg --output-dir runs/full
  motionmod eval --checkpoint runs/full/model.dmmt
  motionmod eval --baseline copy
  motionmod gradcheck --case dmm_block --case warp
  motionmod render --checkpoint runs/full/model.dmmt --seq 3 --pixel 32,30
  motionmod ablate --iterations 500 --output-dir runs/ablate
            """,
        )
        subparsers = parser.add_subparsers(dest="command", metavar="命令")
        subparsers.required = True

        helps = {
            "gen-data": "生成合成精灵数据集",
            "train": "对抗训练生成器",
            "eval": "在测试集上评估检查点或基线",
            "gradcheck": "运行有限差分梯度检查",
            "render": "渲染生成帧与偏移/掩码诊断图",
            "ablate": "训练并评估全部消融变体",
        }
        for command in COMMANDS:
            sub = subparsers.add_parser(command, help=helps[command], description=helps[command])
            ArgumentParser._add_basic_arguments(sub)
            ArgumentParser._add_run_arguments(sub)
            ArgumentParser._add_ablation_arguments(sub)
            ArgumentParser._add_output_arguments(sub)
            extra = getattr(ArgumentParser, f"_add_{command.replace('-', '_')}_arguments", None)
            if extra is not None:
                extra(sub)
        return parser

    @staticmethod
    def parse_arguments(argv: Optional[Sequence[str]] = None) -> Any:
        """
        解析命令行参数.

        Returns:
            argparse.Namespace: 解析后的参数对象
        """
        return ArgumentParser.build_parser().parse_args(argv)

    @staticmethod
    def _add_basic_arguments(parser: argparse.ArgumentParser):
        """添加基本参数"""
        parser.add_argument("--config", help="配置文件路径 (key=value 格式)", default=None)
        parser.add_argument("--seed", help="随机种子", type=int, default=None)
        parser.add_argument("--dataset", help="数据集目录", default=None)
        parser.add_argument("--output-dir", dest="output_dir", help="输出目录", default=None)

    @staticmethod
    def _add_run_arguments(parser: argparse.ArgumentParser):
        """添加运行参数"""
        parser.add_argument("--precision", help="计算精度", choices=PRECISIONS, default=None)
        parser.add_argument("--iterations", help="训练迭代次数", type=int, default=None)
        parser.add_argument("--window", help="窗口长度 M（偶数）", type=int, default=None)
        parser.add_argument("--batch-size", dest="batch_size", help="批大小", type=int, default=None)

    @staticmethod
    def _add_ablation_arguments(parser: argparse.ArgumentParser):
        """添加消融开关"""
        group = parser.add_argument_group("消融开关")
        for flag, text in ABLATION_FLAGS:
            group.add_argument(flag, help=text, action="store_true")

    @staticmethod
    def _add_output_arguments(parser: argparse.ArgumentParser):
        """添加输出控制参数"""
        parser.add_argument("--verbose", "-v", help="显示详细输出", action="store_true")
        parser.add_argument("--quiet", "-q", help="静默模式", action="store_true")

    @staticmethod
    def _add_eval_arguments(parser: argparse.ArgumentParser):
        parser.add_argument("--checkpoint", help="检查点路径", default=None)
        parser.add_argument("--split", help="数据划分", choices=("train", "test"), default="test")
        parser.add_argument("--baseline", help="不加载检查点，评估基线模型",
                            choices=("copy", "constant", "oracle"), default=None)

    @staticmethod
    def _add_gradcheck_arguments(parser: argparse.ArgumentParser):
        parser.add_argument("--case", help="只运行指定用例（可重复）", action="append", default=None)
        parser.add_argument("--negative-control", dest="negative_control",
                            help="同时运行故意写错 VJP 的反例", action="store_true")

    @staticmethod
    def _add_render_arguments(parser: argparse.ArgumentParser):
        parser.add_argument("--checkpoint", help="检查点路径", required=True)
        parser.add_argument("--seq", help="测试序列编号", type=int, default=0)
        parser.add_argument("--start", help="窗口起始帧", type=int, default=0)
        parser.add_argument("--pixel", dest="render_pixel", help="查询像素 x,y", default=None)
