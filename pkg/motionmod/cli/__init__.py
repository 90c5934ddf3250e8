"""
命令行界面模块
"""

from .argument_parser import COMMANDS, ArgumentParser

__all__ = ["ArgumentParser", "COMMANDS"]
