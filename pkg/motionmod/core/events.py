#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""生命周期事件常量，避免硬编码字符串。"""

ON_START = "on_start"
ON_EXIT = "on_exit"
ON_ERROR = "on_error"

LOAD_CONFIG = "load_config"
PREPARE = "prepare"
RUN_COMMAND = "run_command"
ON_SUCCESS = "on_success"
