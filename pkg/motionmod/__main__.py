#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""CLI entry for the `motionmod` command."""

from typing import Optional, Sequence

from motionmod.cli.argument_parser import ArgumentParser
from motionmod.core.context import RunContext
from motionmod.core.engine import Engine
from motionmod.core.errors import EXIT_OK, EXIT_USAGE
from motionmod.core.plugin import PluginManager


def main(argv: Optional[Sequence[str]] = None, progress=None) -> int:
    try:
        args = ArgumentParser.parse_arguments(argv)
    except SystemExit as e:
        # argparse 对 --help 退出 0，对用法错误退出 2；统一映射为用法错误码
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    context = RunContext(args)
    context.progress = progress
    engine = Engine(context, PluginManager(context))
    engine.setup()
    return engine.run()


if __name__ == "__main__":
    raise SystemExit(main())
