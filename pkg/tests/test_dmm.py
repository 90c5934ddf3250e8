#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from motionmod.autograd import ops
from motionmod.autograd.random import RngStream
from motionmod.autograd.tensor import Tensor, default_dtype
from motionmod.core.errors import ContractError
from motionmod.models.config import AblationFlags
from motionmod.nn.module import Conv2d
from motionmod.ops.dmm import DMMBlock, deform_conv2d, modulate_demodulate, regress_offset_mask, tap_offsets


def f64(data):
    return Tensor(np.asarray(data, dtype=np.float64), dtype=np.float64)


def bilinear_oracle(image, x, y):
    h, w = image.shape
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    total = 0.0
    for xi, yi in ((x0, y0), (x0 + 1, y0), (x0, y0 + 1), (x0 + 1, y0 + 1)):
        if 0 <= xi < w and 0 <= yi < h:
            total += (1 - abs(x - xi)) * (1 - abs(y - yi)) * image[yi, xi]
    return total


def test_tap_order_is_row_major_xy():
    taps = tap_offsets(3, 3)
    assert taps.shape == (9, 2)
    np.testing.assert_array_equal(taps[0], [-1, -1])
    np.testing.assert_array_equal(taps[1], [0, -1])
    np.testing.assert_array_equal(taps[4], [0, 0])


def test_even_kernel_rejected():
    with pytest.raises(ContractError):
        tap_offsets(2, 2)


class TestModulateDemodulate:
    def test_single_weight_normalizes_to_one(self):
        out = modulate_demodulate(f64(np.full((1, 1, 1, 1), 2.0)), f64([[1.0]]))
        assert out.data.reshape(-1)[0] == pytest.approx(2.0 / np.sqrt(4.0 + 1e-8))

    def test_zero_weight_stays_zero(self):
        out = modulate_demodulate(f64(np.zeros((2, 3, 3, 3))), f64(np.ones((1, 3))))
        np.testing.assert_array_equal(out.data, np.zeros((1, 2, 3, 3, 3)))

    def test_demodulated_energy_is_unit(self):
        rng = RngStream(0, "demod")
        for trial in range(20):
            stream = rng.child(str(trial))
            w = stream.normal((4, 3, 3, 3))
            a = stream.uniform(0.1, 2.0, (2, 3))
            energy = (modulate_demodulate(f64(w), f64(a)).data ** 2).sum(axis=(2, 3, 4))
            assert np.all(energy <= 1.0)
            assert np.all(energy >= 1.0 - 1e-6)

    def test_global_style_scale_cancels(self):
        rng = RngStream(10, "demod")
        w, a = rng.child("w").normal((4, 3, 3, 3)), rng.uniform(0.5, 1.5, (2, 3))
        np.testing.assert_allclose(
            modulate_demodulate(f64(w), f64(3.7 * a)).data, modulate_demodulate(f64(w), f64(a)).data, atol=1e-6
        )

    def test_non_positive_eps_rejected(self):
        with pytest.raises(ContractError):
            modulate_demodulate(f64(np.ones((1, 1, 1, 1))), f64([[1.0]]), eps=0.0)


class TestRegressOffsetMask:
    def test_zero_head_gives_zero_offsets_and_half_mask(self):
        with default_dtype("f64"):
            head = Conv2d(RngStream(0), "head", 5, 27, 3, zero_init=True)
            rng = RngStream(1, "feat")
            offsets, mask = regress_offset_mask(head, rng.normal((2, 2, 4, 4)), rng.normal((2, 3, 4, 4)), 9, 4.0)
        assert offsets.shape == (2, 18, 4, 4)
        assert mask.shape == (2, 9, 4, 4)
        np.testing.assert_array_equal(offsets.data, 0.0)
        np.testing.assert_array_equal(mask.data, 0.5)

    def test_offsets_bounded_by_max_offset(self):
        with default_dtype("f64"):
            head = Conv2d(RngStream(0), "head", 5, 27, 3)
            head.weight.data *= 50.0
            rng = RngStream(2, "feat")
            offsets, _ = regress_offset_mask(head, rng.normal((1, 2, 4, 4)), rng.normal((1, 3, 4, 4)), 9, 4.0)
        assert np.abs(offsets.data).max() <= 4.0

    def test_size_mismatch_rejected(self):
        head = Conv2d(RngStream(0), "head", 5, 27, 3, zero_init=True)
        with pytest.raises(ContractError):
            regress_offset_mask(head, np.zeros((1, 2, 4, 4)), np.zeros((1, 3, 2, 2)), 9, 4.0)


class TestDeformConv:
    def test_zero_offsets_reduce_to_convolution(self):
        rng = RngStream(3, "deform")
        x = rng.child("x").normal((2, 3, 5, 5))
        w = rng.child("w").normal((4, 3, 3, 3))
        out = deform_conv2d(f64(x), f64(np.zeros((2, 18, 5, 5))), None, f64(w))
        np.testing.assert_allclose(out.data, ops.conv2d(f64(x), f64(w), pad=1).data, atol=1e-12)

    def test_zero_mask_gives_zero_output(self):
        rng = RngStream(4, "deform")
        out = deform_conv2d(
            f64(rng.normal((1, 2, 4, 4))), f64(rng.normal((1, 18, 4, 4))),
            f64(np.zeros((1, 9, 4, 4))), f64(rng.normal((3, 2, 3, 3))),
        )
        np.testing.assert_array_equal(out.data, 0.0)

    def test_half_pixel_offset_matches_per_tap_oracle(self):
        rng = RngStream(5, "deform")
        image = rng.child("x").normal((4, 4))
        w = rng.child("w").normal((1, 1, 3, 3))
        offsets = np.zeros((1, 18, 4, 4))
        offsets[0, 0::2] = 0.5
        out = deform_conv2d(f64(image[None, None]), f64(offsets), None, f64(w)).data[0, 0]
        taps = tap_offsets(3, 3)
        for y in range(4):
            for x in range(4):
                expected = sum(
                    w.reshape(-1)[k] * bilinear_oracle(image, x + taps[k, 0] + 0.5, y + taps[k, 1])
                    for k in range(9)
                )
                assert out[y, x] == pytest.approx(expected, abs=1e-12)

    def test_per_sample_weights(self):
        rng = RngStream(6, "deform")
        x = rng.child("x").normal((2, 2, 4, 4))
        w = rng.child("w").normal((2, 3, 2, 3, 3))
        out = deform_conv2d(f64(x), f64(np.zeros((2, 18, 4, 4))), None, f64(w))
        for b in range(2):
            np.testing.assert_allclose(
                out.data[b], ops.conv2d(f64(x[b:b + 1]), f64(w[b]), pad=1).data[0], atol=1e-12
            )

    def test_receptive_field_bounded_by_max_offset(self):
        # 3x3 核半径 1，偏移至多 R，双线性再扩 1
        radius = 2.0
        rng = RngStream(11, "deform")
        x = rng.child("x").normal((1, 2, 12, 12))
        offsets = f64(radius * np.tanh(3.0 * rng.child("o").normal((1, 18, 12, 12))))
        w = f64(rng.child("w").normal((3, 2, 3, 3)))
        before = deform_conv2d(f64(x), offsets, None, w).data[0, :, 5, 5]
        for far in ((5, 11), (11, 0), (0, 11)):
            moved = x.copy()
            moved[0, :, far[0], far[1]] += 10.0
            np.testing.assert_array_equal(deform_conv2d(f64(moved), offsets, None, w).data[0, :, 5, 5], before)

    def test_offset_shape_checked(self):
        with pytest.raises(ContractError):
            deform_conv2d(f64(np.zeros((1, 2, 4, 4))), f64(np.zeros((1, 9, 4, 4))), None, f64(np.zeros((1, 2, 3, 3))))


class TestDMMBlock:
    def _block(self, **flags):
        with default_dtype("f64"):
            return DMMBlock(RngStream(7), "dmm", 2, 3, 4, d_style=5, max_offset=2.0, flags=AblationFlags(**flags))

    def _inputs(self):
        rng = RngStream(8, "inputs")
        return f64(rng.normal((2, 2, 4, 4))), f64(rng.normal((2, 3, 4, 4))), f64(rng.normal((2, 5)))

    def test_style_changes_output(self):
        block = self._block()
        branch, prev, style = self._inputs()
        first = block(branch, prev, style).features.data
        second = block(branch, prev, f64(RngStream(9).normal((2, 5)))).features.data
        assert np.abs(first - second).max() > 0

    def test_fresh_block_exposes_zero_offsets(self):
        out = self._block()(*self._inputs())
        assert out.features.shape == (2, 4, 4, 4)
        np.testing.assert_array_equal(out.offsets.data, 0.0)
        np.testing.assert_array_equal(out.mask.data, 0.5)

    def test_no_dmm_has_no_offsets(self):
        block = self._block(no_dmm=True)
        out = block(*self._inputs())
        assert out.offsets is None and out.mask is None
        assert not any(name.startswith("head") for name, _ in block.named_parameters())

    def test_no_mask_head_is_smaller(self):
        block = self._block(no_mask=True)
        assert block.head.weight.shape[0] == 18
        assert block(*self._inputs()).mask is None

    def test_no_style_ignores_style_code(self):
        block = self._block(no_style=True)
        branch, prev, style = self._inputs()
        first = block(branch, prev, style).features.data
        second = block(branch, prev, f64(np.zeros((2, 5)))).features.data
        np.testing.assert_array_equal(first, second)

    def test_receptive_field_through_offset_head(self):
        # 偏移头的 3x3 卷积再扩 1，仍在 ceil(3/2) + R + 1 之内
        block = self._block()
        block.head.weight.data[...] = RngStream(12).normal(block.head.weight.shape)
        rng = RngStream(13, "inputs")
        branch, prev, style = rng.normal((1, 2, 12, 12)), rng.normal((1, 3, 12, 12)), f64(rng.normal((1, 5)))
        before = block(f64(branch), f64(prev), style).features.data[0, :, 5, 5]
        for y, x in ((5, 11), (0, 11), (11, 10)):
            moved_branch, moved_prev = branch.copy(), prev.copy()
            moved_branch[0, :, y, x] += 10.0
            moved_prev[0, :, y, x] -= 10.0
            after = block(f64(moved_branch), f64(moved_prev), style).features.data[0, :, 5, 5]
            np.testing.assert_array_equal(after, before)

    def test_unit_style_and_zero_offsets_give_plain_conv(self):
        block = self._block(no_mask=True)
        block.affine.weight.data[...] = 0.0
        branch, prev, style = self._inputs()
        w = block.weight.data
        demodulated = w / np.sqrt((w ** 2).sum(axis=(1, 2, 3), keepdims=True) + block.demod_eps)
        expected = ops.leaky_relu(ops.conv2d(branch, f64(demodulated), pad=1), block.slope).data
        np.testing.assert_allclose(block(branch, prev, style).features.data, expected, atol=1e-12)
