#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
张量、磁带式自动微分、确定性随机数与 Adam.
"""

from . import ops
from .optim import AdamState, adam_step
from .random import RngStream
from .tensor import (
    Parameter,
    Tape,
    Tensor,
    backward,
    default_dtype,
    get_default_dtype,
    no_grad,
    set_default_dtype,
)

__all__ = [
    "ops",
    "AdamState",
    "adam_step",
    "RngStream",
    "Parameter",
    "Tape",
    "Tensor",
    "backward",
    "default_dtype",
    "get_default_dtype",
    "no_grad",
    "set_default_dtype",
]
