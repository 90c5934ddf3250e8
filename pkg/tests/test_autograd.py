#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from motionmod.autograd import ops
from motionmod.autograd.gradcheck import REL_FLOOR, check_gradients, finite_difference_step, relative_error
from motionmod.autograd.optim import AdamState, adam_step
from motionmod.autograd.random import RngStream
from motionmod.autograd.serialize import (
    decode_tensor,
    encode_tensor,
    load_checkpoint,
    load_tensor,
    save_checkpoint,
    save_tensor,
)
from motionmod.autograd.tensor import (
    Parameter,
    Tape,
    Tensor,
    backward,
    default_dtype,
    get_default_dtype,
    no_grad,
)
from motionmod.core.errors import ContractError, DataIOError, NumericalError


def f64(data, grad=False):
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=grad, dtype=np.float64)


def conv_oracle(x, w, pad):
    b, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((b, cout, h + 2 * pad - kh + 1, wd + 2 * pad - kw + 1))
    for n in range(b):
        for o in range(cout):
            for i in range(out.shape[2]):
                for j in range(out.shape[3]):
                    for c in range(cin):
                        for u in range(kh):
                            for v in range(kw):
                                out[n, o, i, j] += xp[n, c, i + u, j + v] * w[o, c, u, v]
    return out


class TestOps:
    def test_conv2d_sum_of_ones(self):
        out = ops.conv2d(f64(np.ones((1, 1, 3, 3))), f64(np.ones((1, 1, 3, 3))), pad=1)
        assert out.data[0, 0, 1, 1] == 9.0

    def test_conv2d_zero_weight_gives_bias(self):
        x = f64(RngStream(0, "x").normal((1, 2, 4, 4)))
        out = ops.conv2d(x, f64(np.zeros((3, 2, 3, 3))), bias=f64([0.5, -1.0, 2.0]), pad=1)
        np.testing.assert_array_equal(out.data[0, 1], np.full((4, 4), -1.0))

    def test_conv2d_matches_loop_oracle(self):
        rng = RngStream(1, "conv")
        x = rng.child("x").normal((1, 2, 5, 5))
        w = rng.child("w").normal((3, 2, 3, 3))
        out = ops.conv2d(f64(x), f64(w), pad=1)
        np.testing.assert_allclose(out.data, conv_oracle(x, w, 1), atol=1e-12)

    def test_leaky_relu_slope(self):
        assert ops.leaky_relu(f64([-1.0]), 0.2).data[0] == pytest.approx(-0.2)

    def test_concat_channels(self):
        out = ops.concat([f64(np.zeros((1, 2, 4, 4))), f64(np.ones((1, 3, 4, 4)))], axis=1)
        assert out.shape == (1, 5, 4, 4)

    def test_upsample_nearest_replicates_blocks(self):
        out = ops.upsample_nearest(f64([[[[1.0, 2.0], [3.0, 4.0]]]]), 2)
        expected = np.array([[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]], dtype=np.float64)
        np.testing.assert_array_equal(out.data[0, 0], expected)

    def test_broadcast_mismatch_is_contract_error(self):
        with pytest.raises(ContractError):
            ops.add(f64(np.zeros((2, 3))), f64(np.zeros((4,))))


class TestBackward:
    def test_weighted_sum(self):
        x = f64([1.0, -2.0, 3.0])
        w = f64([0.5, 0.5, 0.5], grad=True)
        with Tape() as tape:
            loss = ops.sum(ops.mul(w, x))
        grads = backward(loss, tape, params=[w])
        np.testing.assert_array_equal(grads[w], x.data)

    def test_mean_squared_error(self):
        x = f64([1.0, 2.0, 4.0, -1.0], grad=True)
        y = f64([0.0, 2.5, 1.0, 1.0])
        with Tape() as tape:
            loss = ops.mean(ops.square(ops.sub(x, y)))
        grads = backward(loss, tape, params=[x])
        np.testing.assert_allclose(grads[x], 2.0 * (x.data - y.data) / 4.0)

    def test_broadcast_gradient_is_summed(self):
        a = f64(np.ones((2, 3)), grad=True)
        b = f64(np.ones((3,)), grad=True)
        with Tape() as tape:
            loss = ops.sum(ops.add(a, b))
        grads = backward(loss, tape, params=[a, b])
        np.testing.assert_array_equal(grads[b], np.full(3, 2.0))

    def test_unused_parameter_gets_zero_gradient(self):
        used = f64([1.0], grad=True)
        unused = f64([1.0, 2.0], grad=True)
        with Tape() as tape:
            loss = ops.sum(ops.square(used))
        grads = backward(loss, tape, params=[used, unused])
        np.testing.assert_array_equal(grads[unused], np.zeros(2))

    def test_no_grad_records_nothing(self):
        w = f64([1.0, 2.0], grad=True)
        with Tape() as tape:
            with no_grad():
                ops.sum(ops.square(w))
        assert len(tape) == 0

    def test_non_scalar_loss_rejected(self):
        w = f64([1.0, 2.0], grad=True)
        with Tape() as tape:
            out = ops.square(w)
        with pytest.raises(ContractError):
            backward(out, tape)

    def test_nan_raises_with_op_name(self):
        with pytest.raises(NumericalError) as info:
            ops.log(f64([1.0, 0.0]))
        assert info.value.op == "log"

    def test_composite_graph_passes_gradcheck(self):
        rng = RngStream(3, "composite")

        def fn(x, w):
            return ops.sum(ops.tanh(ops.matmul(ops.sigmoid(x), w)))

        result = check_gradients("composite", fn, [rng.normal((3, 4)), rng.normal((4, 2))], rng)
        assert result.passed, result

    def test_difference_step_scales_with_magnitude(self):
        assert finite_difference_step(0.3) == 1e-5
        assert finite_difference_step(-4.0) == pytest.approx(4e-5)

    def test_relative_error_floor_only_below_floor(self):
        assert relative_error(2.0, 2.0002) == pytest.approx(1e-4, rel=1e-3)
        assert relative_error(0.0, 1e-8) == pytest.approx(1e-8 / REL_FLOOR)


class TestAdam:
    def test_zero_gradient_leaves_parameter(self):
        p = Parameter(np.array([1.0, -2.0]), dtype=np.float64)
        adam_step([p], {p: np.zeros(2)}, AdamState(lr=0.1))
        np.testing.assert_array_equal(p.data, [1.0, -2.0])

    def test_first_step_magnitude_is_learning_rate(self):
        p = Parameter(np.array([1.0, 1.0]), dtype=np.float64)
        adam_step([p], {p: np.array([0.3, -5.0])}, AdamState(lr=0.01))
        np.testing.assert_allclose(p.data, [0.99, 1.01], atol=1e-6)

    def test_shape_mismatch_rejected(self):
        p = Parameter(np.zeros(3), dtype=np.float64)
        with pytest.raises(ContractError):
            adam_step([p], {p: np.zeros(2)}, AdamState())

    def test_two_runs_are_bitwise_identical(self):
        def run():
            rng = RngStream(7, "adam")
            p = Parameter(rng.normal((4,)), dtype=np.float32)
            state = AdamState(lr=1e-2)
            for _ in range(5):
                adam_step([p], {p: np.tanh(p.data) * 3.0}, state)
            return p.data.tobytes()

        assert run() == run()


class TestRng:
    def test_same_seed_and_label_reproduce(self):
        assert RngStream(5, "a").normal(8).tolist() == RngStream(5, "a").normal(8).tolist()

    def test_child_streams_are_independent_of_draw_count(self):
        parent = RngStream(5, "a")
        first = parent.child("x").random(4)
        parent.random(100)
        np.testing.assert_array_equal(parent.child("x").random(4), first)
        assert not np.array_equal(parent.child("y").random(4), first)

    def test_permutation_is_a_permutation(self):
        assert sorted(RngStream(1).permutation(20)) == list(range(20))

    def test_empty_integer_range_rejected(self):
        with pytest.raises(ValueError):
            RngStream(0).integers(3, 3)


class TestPrecision:
    def test_default_dtype_context_restores(self):
        before = get_default_dtype()
        with default_dtype("f64"):
            assert Tensor([1.0]).dtype == np.float64
        assert get_default_dtype() == before

    def test_unknown_precision_rejected(self):
        with pytest.raises(ContractError):
            with default_dtype("f16"):
                pass


class TestSerialize:
    def test_tensor_file_is_bitwise_stable(self, tmp_path):
        array = RngStream(2, "ser").normal((2, 3, 4)).astype(np.float32)
        save_tensor(tmp_path / "a.dmmt", array)
        loaded = load_tensor(tmp_path / "a.dmmt")
        assert loaded.dtype == np.float32
        assert loaded.tobytes() == array.tobytes()

    def test_bad_magic_rejected(self):
        data = bytearray(encode_tensor(np.zeros(3)))
        data[0:4] = b"XXXX"
        with pytest.raises(DataIOError):
            decode_tensor(bytes(data))

    def test_truncated_payload_rejected(self):
        data = encode_tensor(np.arange(6, dtype=np.float64))
        with pytest.raises(DataIOError):
            decode_tensor(data[:-3])

    def test_checkpoint_keeps_entry_order(self, tmp_path):
        entries = {"b.weight": np.ones((2, 2)), "a.bias": np.zeros(2, dtype=np.float32), "meta": np.zeros(0)}
        save_checkpoint(tmp_path / "c.dmmt", entries)
        loaded = load_checkpoint(tmp_path / "c.dmmt")
        assert list(loaded) == list(entries)
        for key in entries:
            np.testing.assert_array_equal(loaded[key], entries[key])

    def test_missing_file_is_io_error(self, tmp_path):
        with pytest.raises(DataIOError):
            load_checkpoint(tmp_path / "nope.dmmt")
