#!/usr/bin/env python
# -*- coding: utf-8 -*-

import csv

import numpy as np
import pytest

from motionmod.autograd.random import RngStream
from motionmod.core.errors import ConfigError
from motionmod.data.dataset import SpriteDataset
from motionmod.data.image_io import load_ppm
from motionmod.models import AblationFlags, Generator
from motionmod.render import POINTS_HEADER, level_pixel, render_sequence, sampling_positions


@pytest.fixture
def fresh_generator(tiny_config):
    return Generator(tiny_config().arch(), RngStream(0, "init"))


def test_fresh_generator_outputs(fresh_generator, dataset_dir, tmp_path):
    result = render_sequence(fresh_generator, SpriteDataset(dataset_dir, "test"), 1, tmp_path / "out", pixel=(16, 16))
    assert result.frames == 2
    assert result.blocks == 12
    assert result.points == 12 * 9
    for name in ("frame_01.ppm", "target_02.ppm", "offsets_f01_l0_forward.ppm",
                 "mask_f02_l2_backward.ppm", "overlay_f01_l1_forward.ppm"):
        assert (result.directory / name).is_file()
    np.testing.assert_array_equal(load_ppm(result.directory / "offsets_f01_l2_forward.ppm"), 1.0)
    np.testing.assert_allclose(load_ppm(result.directory / "mask_f01_l0_forward.ppm"), 128 / 255)


def test_zero_offsets_sample_the_regular_grid(fresh_generator, dataset_dir, tmp_path):
    result = render_sequence(fresh_generator, SpriteDataset(dataset_dir, "test"), 0, tmp_path / "out", pixel=(16, 16))
    with open(result.directory / "sampling_points.csv", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert tuple(rows[0]) == POINTS_HEADER
    level0 = [(float(x), float(y)) for _, level, branch, _, x, y in rows[1:10]]
    assert rows[1][1:3] == ["0", "forward"]
    # 4x4 特征层上的 3x3 邻域映射回 32x32 画布，间距 8 像素
    assert level0[4] == (19.5, 19.5)
    assert level0[0] == (11.5, 11.5)


def test_ablated_dmm_writes_frames_only(tiny_config, dataset_dir, tmp_path):
    generator = Generator(tiny_config(no_dmm=True).arch(), RngStream(0, "init"))
    result = render_sequence(generator, SpriteDataset(dataset_dir, "test"), 0, tmp_path / "out", pixel=(16, 16))
    assert result.blocks == 0 and result.points == 0
    assert (result.directory / "frame_02.ppm").is_file()


def test_unknown_sequence(fresh_generator, dataset_dir, tmp_path):
    with pytest.raises(ConfigError):
        render_sequence(fresh_generator, SpriteDataset(dataset_dir, "test"), 7, tmp_path, pixel=(16, 16))


def test_window_past_end(fresh_generator, dataset_dir, tmp_path):
    with pytest.raises(ConfigError):
        render_sequence(fresh_generator, SpriteDataset(dataset_dir, "test"), 0, tmp_path, start=3, pixel=(16, 16))


def test_pixel_outside_canvas(fresh_generator, dataset_dir, tmp_path):
    with pytest.raises(ConfigError):
        render_sequence(fresh_generator, SpriteDataset(dataset_dir, "test"), 0, tmp_path, pixel=(40, 0))


def test_sampling_positions_add_offsets():
    offsets = np.zeros((18, 4, 4))
    offsets[8, 1, 2] = 0.5
    offsets[9, 1, 2] = -1.0
    points = sampling_positions(offsets, (2, 1))
    np.testing.assert_allclose(points[4], [2.5, 0.0])
    np.testing.assert_allclose(points[0], [1.0, 0.0])
    assert level_pixel((31, 0), 32, 4) == (3, 0)
