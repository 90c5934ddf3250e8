#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from motionmod.autograd.random import RngStream
from motionmod.core.errors import ConfigError, ContractError, DataIOError
from motionmod.data.dataset import (
    MARKER,
    SpriteDataset,
    format_drop_record,
    generate_dataset,
    parse_drop_record,
    synthesize_sequence,
)
from motionmod.utils.file_ops import STAGING_SUFFIX


def tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_layout(dataset_dir):
    assert (dataset_dir / MARKER).is_file()
    seq = dataset_dir / "train" / "seq_0000"
    for name in ("source.ppm", "frame_001.ppm", "frame_004.ppm", "pose_000.dmmt", "pose_004.dmmt",
                 "flow_001.dmmt", "meta.txt"):
        assert (seq / name).is_file()
    assert not dataset_dir.with_name(dataset_dir.name + STAGING_SUFFIX).exists()


def test_read_back_matches_synthesis(dataset_dir, tiny_config):
    config = tiny_config()
    loaded = SpriteDataset(dataset_dir, "test").load(1)
    expected = synthesize_sequence(config, "test", 1)
    np.testing.assert_allclose(loaded.frames, expected.frames, atol=1e-12)
    np.testing.assert_allclose(loaded.source, expected.source, atol=1e-12)
    np.testing.assert_allclose(loaded.flows, expected.flows, rtol=1e-6, atol=1e-5)
    assert loaded.dropped == expected.dropped


def test_same_seed_gives_identical_directories(tiny_config, tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    generate_dataset(tiny_config(dataset=str(first), n_train=1, n_test=1))
    generate_dataset(tiny_config(dataset=str(second), n_train=1, n_test=1))
    assert tree_bytes(first) == tree_bytes(second)


def test_regeneration_replaces_dataset(tiny_config, tmp_path):
    target = tmp_path / "data"
    generate_dataset(tiny_config(dataset=str(target), n_train=2, n_test=1))
    generate_dataset(tiny_config(dataset=str(target), n_train=1, n_test=1))
    assert len(SpriteDataset(target, "train")) == 1


def test_foreign_directory_not_overwritten(tiny_config, tmp_path):
    target = tmp_path / "mine"
    target.mkdir()
    (target / "notes.txt").write_text("keep", encoding="utf-8")
    with pytest.raises(DataIOError):
        generate_dataset(tiny_config(dataset=str(target)))
    assert (target / "notes.txt").read_text(encoding="utf-8") == "keep"


def test_odd_window_rejected(tiny_config):
    with pytest.raises(ConfigError):
        tiny_config(window=3)


class TestSpriteDataset:
    def test_sample_batch_shapes(self, dataset_dir):
        batch = SpriteDataset(dataset_dir, "train").sample_batch(RngStream(0), 3, 2)
        assert batch.source.shape == (3, 3, 32, 32)
        assert batch.source_pose.shape == (3, 5, 32, 32)
        assert batch.poses.shape == (3, 2, 5, 32, 32)
        assert batch.flows.shape == (3, 2, 2, 32, 32)
        assert batch.frames.shape == (3, 2, 3, 32, 32)
        assert batch.dropped.shape == (3, 2)
        assert batch.cast(np.float64).flows.dtype == np.float64

    def test_sampling_is_deterministic(self, dataset_dir):
        dataset = SpriteDataset(dataset_dir, "train")
        assert dataset.sample_batch(RngStream(4), 2, 2).ids == dataset.sample_batch(RngStream(4), 2, 2).ids

    def test_window_longer_than_sequence(self, dataset_dir):
        with pytest.raises(ConfigError):
            SpriteDataset(dataset_dir, "train").sample_batch(RngStream(0), 1, 6)

    def test_index_out_of_range(self, dataset_dir):
        with pytest.raises(ContractError):
            SpriteDataset(dataset_dir, "test").load(5)

    def test_missing_marker(self, tmp_path):
        with pytest.raises(DataIOError):
            SpriteDataset(tmp_path, "train")

    def test_unknown_split(self, dataset_dir):
        with pytest.raises(ConfigError):
            SpriteDataset(dataset_dir, "val")


class TestDropRecord:
    def test_round_trip(self):
        dropped = [[], [0, 3], [], [4]]
        text = format_drop_record(dropped)
        assert text == "2:0,2:3,4:4"
        assert parse_drop_record(text, 4) == dropped

    def test_frame_out_of_range(self):
        with pytest.raises(DataIOError):
            parse_drop_record("5:0", 4)

    def test_garbage(self):
        with pytest.raises(DataIOError):
            parse_drop_record("a:b", 4)
