#!/usr/bin/env python
# -*- coding: utf-8 -*-

import csv

import numpy as np
import pytest

from motionmod.autograd.serialize import load_checkpoint
from motionmod.core.errors import CheckpointMismatchError
from motionmod.data.dataset import SpriteDataset
from motionmod.trainer import LOSS_HEADER, Trainer, architecture_hash, load_generator


def train(config):
    return Trainer(config).fit(SpriteDataset(config.dataset, "train"), config.output_dir)


def test_fit_writes_losses_and_checkpoints(tiny_config):
    config = tiny_config()
    result = train(config)
    with open(result.loss_csv, encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert tuple(rows[0]) == LOSS_HEADER
    assert len(rows) == 3
    assert all(len(row) == 8 for row in rows[1:])
    assert [int(row[0]) for row in rows[1:]] == [1, 2]
    assert all(np.isfinite(float(v)) for row in rows[1:] for v in row[1:])
    assert [p.name for p in result.checkpoints] == ["ckpt_000001.dmmt", "ckpt_000002.dmmt"]
    assert result.checkpoint.name == "model.dmmt"
    assert result.iterations == 2


def test_checkpoint_restores_generator(tiny_config):
    config = tiny_config()
    trainer = Trainer(config)
    trainer.fit(SpriteDataset(config.dataset, "train"), config.output_dir)
    generator, iteration = load_generator(config, trainer.save(config.output_dir + "/again.dmmt"))
    assert iteration == 2
    restored = generator.state_dict()
    for name, value in trainer.generator.state_dict().items():
        np.testing.assert_array_equal(restored[name], value)


def test_flag_mismatch_refuses_checkpoint(tiny_config):
    result = train(tiny_config())
    with pytest.raises(CheckpointMismatchError):
        load_generator(tiny_config(no_mask=True), result.checkpoint)


def test_ablated_checkpoint_has_no_branch_parameters(tiny_config):
    result = train(tiny_config(no_backward=True))
    names = [name for name in load_checkpoint(result.checkpoint) if name.startswith("generator.")]
    assert names
    assert not any("backward" in name for name in names)


def test_architecture_hash_tracks_flags(tiny_config):
    assert architecture_hash(tiny_config().arch()) != architecture_hash(tiny_config(no_dcn=True).arch())
    assert architecture_hash(tiny_config().arch()) == architecture_hash(tiny_config(seed=4).arch())


def test_same_seed_same_losses(tiny_config, tmp_path):
    first = train(tiny_config(output_dir=str(tmp_path / "a")))
    second = train(tiny_config(output_dir=str(tmp_path / "b")))
    assert first.loss_csv.read_bytes() == second.loss_csv.read_bytes()
    assert first.checkpoint.read_bytes() == second.checkpoint.read_bytes()
