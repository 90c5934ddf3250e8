#!/usr/bin/env python
# -*- coding: utf-8 -*-

import os
from pathlib import Path

import pytest

from motionmod.core.config import (
    ConfigManager,
    RunConfig,
    load_config_file,
    parse_config_text,
    serialize_config,
)
from motionmod.core.errors import ConfigError
from motionmod.utils.worker_pool import THREADS_ENV, WorkerPool, resolve_worker_count

DEFAULT_CFG = Path(__file__).resolve().parents[1] / "configs" / "default.cfg"


def test_default_file_matches_defaults():
    assert RunConfig(**load_config_file(DEFAULT_CFG)) == RunConfig()


def test_serialized_config_reads_back(tiny_config):
    config = tiny_config(no_mask=True, lr=3e-4)
    assert RunConfig(**parse_config_text(serialize_config(config))) == config


def test_comments_and_blank_lines_ignored():
    values = parse_config_text("# 注释\n\nseed = 7\nlevel_channels=8,8,4\nocclusion=true\n")
    assert values == {"seed": 7, "level_channels": (8, 8, 4), "occlusion": True}


@pytest.mark.parametrize(
    "text",
    ["colour=red", "seed=1\nseed=2", "seed", "window=two", "occlusion=maybe", "level_channels=8,x,4"],
)
def test_bad_text_rejected(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


@pytest.mark.parametrize(
    "changes",
    [
        dict(window=3),
        dict(train_seq_len=6, window=8),
        dict(resolution=20),
        dict(precision="f16"),
        dict(temporal_clip=10),
        dict(render_pixel=(64, 0)),
        dict(no_forward=True, no_backward=True),
        dict(lambda_cx=-1.0),
    ],
)
def test_invalid_values_rejected(changes):
    with pytest.raises(ConfigError):
        RunConfig(**changes)


def test_all_problems_reported_together():
    with pytest.raises(ConfigError) as info:
        RunConfig(window=3, precision="f16")
    assert "window" in str(info.value) and "precision" in str(info.value)


class TestConfigManager:
    def test_precedence(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed=3\niterations=50\n", encoding="utf-8")
        manager = ConfigManager(path, {"seed": 9, "batch_size": None})
        assert manager.config.seed == 9
        assert manager.config.iterations == 50
        assert manager.config.batch_size == RunConfig().batch_size

    def test_unset_cli_flag_keeps_file_value(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("no_mask=true\n", encoding="utf-8")
        assert ConfigManager(path, {"no_mask": False}).config.no_mask is True
        assert ConfigManager(None, {"no_mask": True}).config.no_mask is True

    def test_unrelated_args_ignored(self):
        assert ConfigManager(None, {"command": "train", "verbose": True}).config == RunConfig()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ConfigManager(tmp_path / "absent.cfg")

    def test_saved_config_reloads(self, tmp_path):
        manager = ConfigManager(None, {"seed": 11})
        saved = manager.save_merged_config(tmp_path / "out" / "config.cfg")
        assert ConfigManager(saved).config == manager.config


class TestWorkerCount:
    def test_environment_wins(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert resolve_worker_count(8) == 3

    def test_environment_only_caps(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "4096")
        assert resolve_worker_count() == (os.cpu_count() or 1) + 1
        assert resolve_worker_count(2) == 2

    @pytest.mark.parametrize("raw", ["zero", "0", "-2"])
    def test_invalid_environment(self, monkeypatch, raw):
        monkeypatch.setenv(THREADS_ENV, raw)
        with pytest.raises(ConfigError):
            resolve_worker_count()

    def test_results_keep_submission_order(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "4")
        with WorkerPool() as pool:
            assert pool.map(lambda x: x * x, range(20)) == [x * x for x in range(20)]
