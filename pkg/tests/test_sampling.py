#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from motionmod.autograd.random import RngStream
from motionmod.autograd.tensor import Tensor
from motionmod.core.errors import ContractError
from motionmod.ops.sampling import base_grid, bilinear_sample, flow_to_color, warp


def f64(data):
    return Tensor(np.asarray(data, dtype=np.float64), dtype=np.float64)


def coords(x, y):
    return f64(np.array([x, y], dtype=np.float64).reshape(1, 2, 1))


class TestBilinearSample:
    def test_integer_coordinate_is_exact(self):
        image = RngStream(0, "img").normal((1, 2, 5, 6))
        out = bilinear_sample(f64(image), coords(2.0, 3.0))
        np.testing.assert_array_equal(out.data[0, :, 0], image[0, :, 3, 2])

    def test_centre_of_patch_averages_corners(self):
        patch = np.array([[0.0, 1.0], [2.0, 3.0]]).reshape(1, 1, 2, 2)
        out = bilinear_sample(f64(patch), coords(0.5, 0.5))
        assert out.data[0, 0, 0] == pytest.approx(1.5)

    def test_outside_is_zero(self):
        out = bilinear_sample(f64(np.ones((1, 1, 3, 3))), coords(-1.0, -1.0))
        assert out.data[0, 0, 0] == 0.0

    def test_coordinate_shape_checked(self):
        with pytest.raises(ContractError):
            bilinear_sample(f64(np.ones((1, 1, 3, 3))), f64(np.zeros((1, 3, 4))))


class TestWarp:
    def test_zero_flow_is_identity(self):
        image = RngStream(1, "img").uniform(0.0, 1.0, (2, 3, 8, 8))
        out = warp(f64(np.zeros((2, 2, 8, 8))), f64(image))
        np.testing.assert_array_equal(out.data, image)

    def test_unit_shift_moves_columns(self):
        columns = np.tile(np.arange(6, dtype=np.float64), (5, 1)).reshape(1, 1, 5, 6)
        flow = np.zeros((1, 2, 5, 6))
        flow[:, 0] = 1.0
        out = warp(f64(flow), f64(columns)).data[0, 0]
        np.testing.assert_array_equal(out[:, :-1], columns[0, 0, :, 1:])
        np.testing.assert_array_equal(out[:, -1], np.zeros(5))

    def test_forward_then_inverse_recovers_smooth_image(self):
        h = w = 16
        grid = base_grid(h, w)
        image = (0.5 + 0.25 * np.sin(grid[0] / 5.0) * np.cos(grid[1] / 7.0))[None, None]
        flow = np.zeros((1, 2, h, w))
        flow[:, 0], flow[:, 1] = 0.7, -0.4
        there = warp(f64(flow), f64(image))
        back = warp(f64(-flow), there).data
        interior = (slice(None), slice(None), slice(2, -2), slice(2, -2))
        assert np.abs(back[interior] - image[interior]).max() < 1e-2

    def test_size_mismatch_rejected(self):
        with pytest.raises(ContractError):
            warp(f64(np.zeros((1, 2, 4, 4))), f64(np.zeros((1, 3, 5, 5))))


class TestFlowToColor:
    def test_zero_flow_is_white(self):
        np.testing.assert_array_equal(flow_to_color(np.zeros((2, 4, 4))), np.ones((4, 4, 3)))

    def test_constant_flow_is_uniform(self):
        flow = np.zeros((2, 4, 4))
        flow[0] = 1.0
        rgb = flow_to_color(flow)
        np.testing.assert_allclose(rgb, np.broadcast_to(rgb[0, 0], rgb.shape))
        assert not np.allclose(rgb[0, 0], 1.0)

    def test_opposite_directions_differ(self):
        flow = np.zeros((2, 1, 2))
        flow[0, 0, 0], flow[0, 0, 1] = 1.0, -1.0
        rgb = flow_to_color(flow)
        assert not np.allclose(rgb[0, 0], rgb[0, 1])
