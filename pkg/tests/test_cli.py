#!/usr/bin/env python
# -*- coding: utf-8 -*-

import argparse

import numpy as np
import pytest

from motionmod.__main__ import main
from motionmod.autograd.tensor import get_default_dtype
from motionmod.core.context import RunContext
from motionmod.core.engine import Engine
from motionmod.core.errors import EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, DataIOError
from motionmod.core.event_bus import EventBus
from motionmod.core.events import ON_ERROR, ON_EXIT, ON_START, ON_SUCCESS, PREPARE, RUN_COMMAND
from motionmod.core.plugin import BasePlugin
from motionmod.data.dataset import MARKER, SpriteDataset


def run(progress, *argv):
    return main(list(argv), progress=progress)


class TestCommands:
    def test_gen_data(self, quiet_progress, config_file, tmp_path):
        target = tmp_path / "fresh"
        assert run(quiet_progress, "gen-data", "--config", str(config_file), "--dataset", str(target)) == EXIT_OK
        assert (target / MARKER).is_file()
        assert len(SpriteDataset(target, "test")) == 2

    def test_train_then_eval_and_render(self, quiet_progress, config_file, tmp_path):
        out = tmp_path / "run"
        assert run(quiet_progress, "train", "--config", str(config_file)) == EXIT_OK
        assert (out / "model.dmmt").is_file()
        assert (out / "config.cfg").is_file()
        assert (out / "train_loss.csv").is_file()

        assert run(quiet_progress, "eval", "--config", str(config_file)) == EXIT_OK
        assert (out / "metrics.csv").is_file()

        code = run(quiet_progress, "render", "--config", str(config_file),
                   "--checkpoint", str(out / "model.dmmt"), "--seq", "1", "--pixel", "8,20")
        assert code == EXIT_OK
        assert (out / "render" / "seq_0001" / "sampling_points.csv").is_file()

        # 消融开关与检查点不一致
        code = run(quiet_progress, "eval", "--config", str(config_file), "--no-mask",
                   "--checkpoint", str(out / "model.dmmt"))
        assert code == EXIT_USAGE

    def test_baseline_eval(self, quiet_progress, config_file, tmp_path):
        assert run(quiet_progress, "eval", "--config", str(config_file), "--baseline", "copy") == EXIT_OK
        assert (tmp_path / "run" / "metrics_copy.csv").is_file()

    def test_train_split_has_own_file(self, quiet_progress, config_file, tmp_path):
        assert run(quiet_progress, "eval", "--config", str(config_file), "--baseline", "copy", "--split", "train") == EXIT_OK
        assert (tmp_path / "run" / "metrics_copy_train.csv").is_file()
        assert not (tmp_path / "run" / "metrics_copy.csv").exists()

    def test_precision_flag_sets_default_dtype(self, quiet_progress, config_file):
        assert run(quiet_progress, "eval", "--config", str(config_file), "--baseline", "oracle",
                   "--precision", "f64") == EXIT_OK
        assert np.dtype(get_default_dtype()) == np.float64

    def test_gradcheck_case(self, quiet_progress):
        assert run(quiet_progress, "gradcheck", "--case", "add", "--case", "warp") == EXIT_OK

    def test_negative_control_fails(self, quiet_progress):
        assert run(quiet_progress, "gradcheck", "--case", "corrupted_vjp", "--negative-control") == EXIT_NUMERICAL


class TestExitCodes:
    @pytest.mark.parametrize("argv", [["frobnicate"], ["train", "--window", "two"], ["render"], []])
    def test_usage_errors(self, quiet_progress, argv):
        assert run(quiet_progress, *argv) == EXIT_USAGE

    def test_help(self, quiet_progress, capsys):
        assert run(quiet_progress, "--help") == EXIT_OK

    def test_missing_config_file(self, quiet_progress, tmp_path):
        assert run(quiet_progress, "train", "--config", str(tmp_path / "absent.cfg")) == EXIT_USAGE

    def test_invalid_config_value(self, quiet_progress, config_file):
        assert run(quiet_progress, "train", "--config", str(config_file), "--window", "3") == EXIT_USAGE

    def test_missing_dataset(self, quiet_progress, config_file, tmp_path):
        code = run(quiet_progress, "train", "--config", str(config_file), "--dataset", str(tmp_path / "none"))
        assert code == EXIT_IO

    def test_invalid_thread_count(self, quiet_progress, config_file, monkeypatch):
        monkeypatch.setenv("DMM_THREADS", "many")
        assert run(quiet_progress, "eval", "--config", str(config_file), "--baseline", "copy") == EXIT_USAGE

    def test_error_reported_on_console(self, quiet_progress, config_file, tmp_path):
        run(quiet_progress, "train", "--config", str(config_file), "--dataset", str(tmp_path / "none"))
        assert "DataIOError" in quiet_progress.console.file.getvalue()


class _Recorder(BasePlugin):
    def __init__(self, context, failing_event=None):
        super().__init__(context)
        self.failing_event = failing_event

    def register(self, bus: EventBus):
        for event in (ON_START, PREPARE, RUN_COMMAND, ON_SUCCESS, ON_ERROR, ON_EXIT):
            bus.subscribe(event, self._handler(event))

    def _handler(self, event):
        def handle(ctx):
            ctx.state.setdefault("events", []).append(event)
            if event == self.failing_event:
                raise DataIOError("磁盘已满")

        return handle


class _Plugins:
    def __init__(self, plugins):
        self.plugins = plugins

    def load_builtin_plugins(self):
        return self.plugins

    def register_plugins(self, bus, plugins):
        for p in plugins:
            p.register(bus)


def run_engine(failing_event=None):
    context = RunContext(argparse.Namespace(command="train"))
    engine = Engine(context, _Plugins([_Recorder(context, failing_event)]))
    engine.setup()
    return engine.run(), context


class TestEngine:
    def test_lifecycle_order(self):
        code, ctx = run_engine()
        assert code == EXIT_OK
        assert ctx.state["events"] == [ON_START, PREPARE, RUN_COMMAND, ON_SUCCESS, ON_EXIT]

    def test_error_maps_exit_code_and_skips_rest(self):
        code, ctx = run_engine(PREPARE)
        assert code == EXIT_IO
        assert ctx.state["events"] == [ON_START, PREPARE, ON_ERROR, ON_EXIT]
        assert ctx.errors[-1][0] == PREPARE

    def test_bus_priority_and_stop_after_error(self):
        bus, calls = EventBus(), []
        ctx = RunContext(argparse.Namespace(command="x"))

        def fail(_):
            calls.append("fail")
            raise ValueError("x")

        bus.subscribe("e", lambda _: calls.append("late"), priority=50)
        bus.subscribe("e", fail, priority=20)
        bus.subscribe("e", lambda _: calls.append("early"), priority=10)
        bus.emit("e", ctx)
        assert calls == ["early", "fail"]
        assert isinstance(ctx.errors[0][1], ValueError)
