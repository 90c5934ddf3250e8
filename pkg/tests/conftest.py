#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
测试公共夹具: 32x32 的小配置、会话级小数据集与静默进度管理器.
"""

import io

import pytest
from rich.console import Console

from motionmod.autograd.tensor import set_default_dtype
from motionmod.core.config import RunConfig
from motionmod.data.dataset import generate_dataset
from motionmod.models.config import ArchConfig
from motionmod.utils.progress import ProgressManager

# 精灵至少需要 32x32 画布；网络宽度压到最小以便在 CPU 上秒级完成
TINY = dict(
    resolution=32,
    window=2,
    batch_size=1,
    iterations=2,
    checkpoint_interval=1,
    n_train=2,
    n_test=2,
    train_seq_len=4,
    test_seq_len=4,
    d_style=4,
    branch_channels=2,
    level_channels=(4, 4, 4),
    max_offset=2.0,
    cx_max_samples=16,
    eval_repetitions=2,
    eval_clips_per_sequence=2,
    temporal_clip=2,
    render_pixel=(16, 16),
)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="运行训练规模的验收测试")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="需要 --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _restore_precision():
    # 命令行路径会修改全局默认精度
    yield
    set_default_dtype("f32")


@pytest.fixture
def quiet_progress():
    return ProgressManager(quiet=True, console=Console(file=io.StringIO()))


@pytest.fixture
def tiny_arch():
    def build(**changes) -> ArchConfig:
        values = dict(resolution=8, window=2, d_style=4, level_channels=(4, 4, 3), branch_channels=2, max_offset=2.0)
        values.update(changes)
        return ArchConfig(**values)

    return build


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("sprites") / "data"
    generate_dataset(RunConfig(**TINY, dataset=str(root)))
    return root


@pytest.fixture
def tiny_config(dataset_dir, tmp_path):
    def build(**changes) -> RunConfig:
        values = dict(TINY, dataset=str(dataset_dir), output_dir=str(tmp_path / "run"))
        values.update(changes)
        return RunConfig(**values)

    return build


@pytest.fixture
def config_file(dataset_dir, tmp_path):
    """写出 TINY 配置文件，供命令行测试使用."""
    path = tmp_path / "tiny.cfg"
    lines = [f"{key}={','.join(map(str, value)) if isinstance(value, tuple) else value}" for key, value in TINY.items()]
    lines.append(f"dataset={dataset_dir}")
    lines.append(f"output_dir={tmp_path / 'run'}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
