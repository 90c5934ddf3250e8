#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
梯度检查用例注册表: 每个已注册运算、DMM 块、一步解码与六项损失都在 f64 小尺寸上
与中心差分比较.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .autograd import ops
from .autograd.gradcheck import DEFAULT_TOLERANCE, GradcheckResult, check_gradients
from .autograd.random import RngStream
from .autograd.tensor import Tensor, as_tensor, default_dtype, record
from .core.errors import ConfigError, GradcheckFailure
from .losses import (
    LossWeights,
    contextual_loss,
    discriminator_loss,
    generator_adv_loss,
    gram_loss,
    l1_loss,
    perceptual_loss,
    total_loss,
)
from .models import ArchConfig, FeatureExtractor, Generator, SpatialDiscriminator, TemporalDiscriminator
from .nn.module import Conv2d
from .ops.dmm import DMMBlock, deform_conv2d, modulate_demodulate, regress_offset_mask
from .ops.sampling import bilinear_sample, warp

CaseSetup = Tuple[Callable[..., Tensor], List[np.ndarray], List[str]]


@dataclass
class GradcheckCase:
    name: str
    group: str
    build: Callable[[RngStream], CaseSetup]


CASES: Dict[str, GradcheckCase] = {}
NEGATIVE_GROUP = "negative"


def register(name: str, group: str = "ops"):
    """注册一个用例；build(rng) 返回 (fn, 输入初值, 输入名)."""

    def decorator(build: Callable[[RngStream], CaseSetup]):
        CASES[name] = GradcheckCase(name, group, build)
        return build

    return decorator


# ----------------------------------------------------------------------
# 辅助
# ----------------------------------------------------------------------

def _signed(rng: RngStream, shape, low: float = 0.2, high: float = 1.0) -> np.ndarray:
    """绝对值落在 [low, high] 的随机数，远离 0 处的折点."""
    magnitude = rng.uniform(low, high, shape)
    return np.where(rng.random(shape) < 0.5, -magnitude, magnitude)


def _fractional(rng: RngStream, shape, low: int, high: int) -> np.ndarray:
    """整数部分在 [low, high)、小数部分在 [0.25, 0.75] 的坐标，远离双线性折点."""
    whole = np.floor(rng.uniform(low, high, shape))
    return whole + rng.uniform(0.25, 0.75, shape)


def _projector(rng: RngStream) -> Callable[[Tensor], Tensor]:
    """用固定随机权重把张量投影为标量；权重按输出形状首次调用时生成."""
    stream = rng.child("projection")
    weights: Dict[tuple, np.ndarray] = {}

    def project(x: Tensor) -> Tensor:
        if x.shape not in weights:
            weights[x.shape] = stream.normal(x.shape)
        return ops.sum(ops.mul(x, weights[x.shape]))

    return project


def _bind(root, values: Dict[str, Tensor]) -> None:
    """按点号路径把模块参数替换为待检查的张量."""
    for path, value in values.items():
        *parents, leaf = path.split(".")
        owner = root
        for part in parents:
            owner = owner[int(part)] if isinstance(owner, list) else getattr(owner, part)
        setattr(owner, leaf, value)


def _randomize_heads(module, rng: RngStream, std: float = 0.3) -> None:
    """把零初始化的偏移/掩码回归头换成随机值，使采样位置不落在整数网格上."""
    for name, p in module.named_parameters():
        if ".head." in f".{name}":
            p.data = rng.child(name).normal(p.shape) * std


def _tiny_arch() -> ArchConfig:
    return ArchConfig(
        resolution=8, window=2, d_style=4, keypoints=5, level_channels=(4, 4, 3),
        branch_channels=2, max_offset=2.0,
    )


def _unary(name: str, op: Callable[[Tensor], Tensor], sample: Callable[[RngStream], np.ndarray]):
    @register(name)
    def build(rng: RngStream) -> CaseSetup:
        x = sample(rng.child("x"))
        project = _projector(rng)
        return (lambda t: project(op(t))), [x], ["x"]

    return build


def _binary(name: str, op: Callable[[Tensor, Tensor], Tensor], shape_a, shape_b, sample_b=None):
    @register(name)
    def build(rng: RngStream) -> CaseSetup:
        a = rng.child("a").normal(shape_a)
        b = sample_b(rng.child("b"), shape_b) if sample_b else rng.child("b").normal(shape_b)
        project = _projector(rng)
        return (lambda x, y: project(op(x, y))), [a, b], ["a", "b"]

    return build


# ----------------------------------------------------------------------
# 基本运算
# ----------------------------------------------------------------------

_binary("add", ops.add, (2, 3), (3,))
_binary("sub", ops.sub, (2, 3), (2, 1))
_binary("mul", ops.mul, (2, 3), (2, 3))
_binary("div", ops.div, (2, 3), (1, 3), sample_b=lambda r, s: _signed(r, s, 0.5, 1.5))

_unary("neg", ops.neg, lambda r: r.normal((2, 3)))
_unary("exp", ops.exp, lambda r: r.normal((2, 3)))
_unary("log", ops.log, lambda r: r.uniform(0.5, 2.0, (2, 3)))
_unary("sqrt", ops.sqrt, lambda r: r.uniform(0.5, 2.0, (2, 3)))
_unary("absolute", ops.absolute, lambda r: _signed(r, (2, 3)))
_unary("square", ops.square, lambda r: r.normal((2, 3)))
_unary("pow_scalar", lambda t: ops.pow_scalar(t, 1.5), lambda r: r.uniform(0.5, 2.0, (2, 3)))
_unary("leaky_relu", ops.leaky_relu, lambda r: _signed(r, (2, 4)))
_unary("sigmoid", ops.sigmoid, lambda r: r.normal((2, 3)))
_unary("tanh", ops.tanh, lambda r: r.normal((2, 3)))
_unary("softplus", ops.softplus, lambda r: r.normal((2, 3)))
_unary("sum_axis", lambda t: ops.sum(t, axis=1, keepdims=True), lambda r: r.normal((2, 3, 2)))
_unary("mean", lambda t: ops.mean(t, axis=(0, 2)), lambda r: r.normal((2, 3, 2)))
_unary("amax", lambda t: ops.amax(t, axis=1), lambda r: r.normal((3, 4)))
_unary("amin", lambda t: ops.amin(t, axis=0), lambda r: r.normal((3, 4)))
_unary("reshape_transpose", lambda t: ops.transpose(ops.reshape(t, (3, 2, 2)), (2, 0, 1)),
       lambda r: r.normal((2, 6)))
_unary("getitem", lambda t: ops.getitem(t, (np.array([0, 2, 0]), slice(1, 3))), lambda r: r.normal((3, 4)))
_unary("broadcast_to", lambda t: ops.broadcast_to(t, (2, 3, 4)), lambda r: r.normal((3, 1)))
_unary("upsample_nearest", lambda t: ops.upsample_nearest(t, 2), lambda r: r.normal((1, 2, 3, 3)))
_unary("avg_pool2d", lambda t: ops.avg_pool2d(t, 2), lambda r: r.normal((1, 2, 4, 4)))
_unary("avg_pool_global", ops.avg_pool_global, lambda r: r.normal((2, 3, 3, 3)))
_binary("einsum", lambda a, b: ops.einsum("bij,bjk->bik", a, b), (2, 3, 4), (2, 4, 2))
_binary("matmul", ops.matmul, (3, 4), (4, 2))


@register("concat")
def _concat(rng: RngStream) -> CaseSetup:
    a, b = rng.child("a").normal((2, 1, 3)), rng.child("b").normal((2, 2, 3))
    project = _projector(rng)
    return (lambda x, y: project(ops.concat([x, y], axis=1))), [a, b], ["a", "b"]


@register("stack")
def _stack(rng: RngStream) -> CaseSetup:
    a, b = rng.child("a").normal((2, 3)), rng.child("b").normal((2, 3))
    project = _projector(rng)
    return (lambda x, y: project(ops.stack([x, y], axis=1))), [a, b], ["a", "b"]


def _conv_case(name: str, fn, x_shape, w_shape, **kwargs):
    @register(name)
    def build(rng: RngStream) -> CaseSetup:
        x = rng.child("x").normal(x_shape)
        w = rng.child("w").normal(w_shape) * 0.5
        b = rng.child("b").normal((w_shape[0],))
        project = _projector(rng)
        return (lambda xi, wi, bi: project(fn(xi, wi, bi, **kwargs))), [x, w, b], ["x", "weight", "bias"]

    return build


_conv_case("conv2d", ops.conv2d, (1, 2, 5, 5), (3, 2, 3, 3), stride=1, pad=1)
_conv_case("conv2d_stride2", ops.conv2d, (2, 2, 6, 6), (3, 2, 3, 3), stride=2, pad=1)
_conv_case("conv3d", ops.conv3d, (1, 2, 4, 5, 5), (2, 2, 3, 3, 3), stride=(1, 2, 2), pad=1)


# ----------------------------------------------------------------------
# 采样与 DMM
# ----------------------------------------------------------------------

@register("bilinear_sample", "sampling")
def _bilinear(rng: RngStream) -> CaseSetup:
    image = rng.child("image").normal((1, 2, 5, 5))
    coords = _fractional(rng.child("coords"), (1, 2, 3, 4), -1, 5)
    project = _projector(rng)
    return (lambda im, c: project(bilinear_sample(im, c))), [image, coords], ["image", "coords"]


@register("warp", "sampling")
def _warp(rng: RngStream) -> CaseSetup:
    image = rng.child("image").normal((1, 3, 5, 5))
    flow = _fractional(rng.child("flow"), (1, 2, 5, 5), -2, 2)
    project = _projector(rng)
    return (lambda f, im: project(warp(f, im))), [flow, image], ["flow", "image"]


@register("modulate_demodulate", "dmm")
def _modulate(rng: RngStream) -> CaseSetup:
    weight = rng.child("w").normal((3, 2, 3, 3))
    style = rng.child("A").uniform(0.5, 1.5, (2, 2))
    project = _projector(rng)
    return (lambda w, a: project(modulate_demodulate(w, a))), [weight, style], ["weight", "style"]


@register("regress_offset_mask", "dmm")
def _regress(rng: RngStream) -> CaseSetup:
    head = Conv2d(rng, "head", 5, 27, 3)
    branch = rng.child("branch").normal((1, 2, 4, 4))
    prev = rng.child("prev").normal((1, 3, 4, 4))
    w = rng.child("head.w").normal((27, 5, 3, 3)) * 0.3
    project_o = _projector(rng.child("o"))
    project_m = _projector(rng.child("m"))

    def fn(f, p, hw):
        _bind(head, {"weight": hw})
        offsets, mask = regress_offset_mask(head, f, p, taps=9, max_offset=2.0)
        return ops.add(project_o(offsets), project_m(mask))

    return fn, [branch, prev, w], ["branch", "prev", "head.weight"]


@register("deform_conv2d", "dmm")
def _deform(rng: RngStream) -> CaseSetup:
    feat = rng.child("feat").normal((1, 2, 5, 5))
    offsets = _signed(rng.child("offsets"), (1, 18, 5, 5), 0.3, 0.7)
    mask = rng.child("mask").uniform(0.1, 0.9, (1, 9, 5, 5))
    weight = rng.child("weight").normal((1, 3, 2, 3, 3)) * 0.5
    project = _projector(rng)
    return (
        (lambda f, o, m, w: project(deform_conv2d(f, o, m, w))),
        [feat, offsets, mask, weight],
        ["feat", "offsets", "mask", "weight"],
    )


@register("dmm_block", "dmm")
def _dmm_block(rng: RngStream) -> CaseSetup:
    block = DMMBlock(rng, "block", branch_channels=2, prev_channels=3, out_channels=3, d_style=4, max_offset=2.0)
    _randomize_heads(block, rng.child("heads"))
    branch = rng.child("branch").normal((1, 2, 4, 4))
    prev = rng.child("prev").normal((1, 3, 4, 4))
    style = rng.child("style").normal((1, 4))
    weight = block.weight.data.copy()
    affine = block.affine.weight.data.copy()
    head = block.head.weight.data.copy()
    project = _projector(rng)

    def fn(f, p, s, w, aw, hw):
        _bind(block, {"weight": w, "affine.weight": aw, "head.weight": hw})
        return project(block(f, p, s).features)

    return fn, [branch, prev, style, weight, affine, head], [
        "branch", "prev", "style", "weight", "affine.weight", "head.weight"
    ]


# ----------------------------------------------------------------------
# 模型
# ----------------------------------------------------------------------

@register("decode_step", "models")
def _decode_step(rng: RngStream) -> CaseSetup:
    generator = Generator(_tiny_arch(), rng)
    _randomize_heads(generator, rng.child("heads"))
    f = rng.child("f").normal((1, 2, 4, 4))
    b = rng.child("b").normal((1, 2, 4, 4))
    s = rng.child("s").normal((1, 4, 1, 1))
    style = rng.child("style").normal((1, 4))
    project = _projector(rng)
    return (
        (lambda fi, bi, si, st: project(generator.decode_frame(fi, bi, si, st))),
        [f, b, s, style],
        ["forward", "backward", "structural", "style"],
    )


@register("generate_window", "models")
def _generate_window(rng: RngStream) -> CaseSetup:
    generator = Generator(_tiny_arch(), rng)
    _randomize_heads(generator, rng.child("heads"))
    source = rng.child("source").uniform(0.0, 1.0, (1, 3, 8, 8))
    poses = rng.child("poses").uniform(0.0, 1.0, (1, 2, 5, 8, 8))
    source_pose = np.zeros((1, 5, 8, 8))
    flows = _fractional(rng.child("flows"), (1, 2, 2, 8, 8), -1, 1)
    project = _projector(rng)
    return (
        (lambda src, p: project(generator.generate(src, source_pose, p, flows))),
        [source, poses],
        ["source", "poses"],
    )


@register("d_spatial", "models")
def _d_spatial(rng: RngStream) -> CaseSetup:
    disc = SpatialDiscriminator(rng)
    source = rng.child("source").uniform(0.0, 1.0, (1, 3, 8, 8))
    image = rng.child("image").uniform(0.0, 1.0, (1, 3, 8, 8))
    project = _projector(rng)
    return (lambda s, i: project(disc(s, i))), [source, image], ["source", "image"]


@register("d_temporal", "models")
def _d_temporal(rng: RngStream) -> CaseSetup:
    disc = TemporalDiscriminator(rng)
    clip = rng.child("clip").uniform(0.0, 1.0, (1, 3, 4, 8, 8))
    project = _projector(rng)
    return (lambda c: project(disc(c))), [clip], ["clip"]


# ----------------------------------------------------------------------
# 损失
# ----------------------------------------------------------------------

def _image_pair(rng: RngStream, size: int) -> Tuple[np.ndarray, np.ndarray]:
    return (rng.child("pred").uniform(0.0, 1.0, (1, 3, size, size)),
            rng.child("target").uniform(0.0, 1.0, (1, 3, size, size)))


@register("l1_loss", "losses")
def _l1(rng: RngStream) -> CaseSetup:
    pred, target = _image_pair(rng, 4)
    return (lambda p: l1_loss(p, target)), [pred], ["pred"]


def _feature_loss_case(name: str, loss, size: int):
    @register(name, "losses")
    def build(rng: RngStream) -> CaseSetup:
        extractor = FeatureExtractor(seed=0)
        pred, target = _image_pair(rng, size)
        return (lambda p: loss(p, target, extractor)), [pred], ["pred"]

    return build


_feature_loss_case("perceptual_loss", perceptual_loss, 8)
_feature_loss_case("gram_loss", gram_loss, 8)
_feature_loss_case("contextual_loss", contextual_loss, 16)


def _adversarial_case(name: str, form: str):
    @register(name, "losses")
    def build(rng: RngStream) -> CaseSetup:
        real = rng.child("real").normal((2, 1, 2, 2))
        fake = rng.child("fake").normal((2, 1, 2, 2))

        def fn(r, f):
            return ops.add(discriminator_loss(r, f, form), ops.mul(generator_adv_loss(f, form), 0.7))

        return fn, [real, fake], ["real", "fake"]

    return build


_adversarial_case("adversarial_lsgan", "lsgan")
_adversarial_case("adversarial_log", "log")


@register("total_loss", "losses")
def _total(rng: RngStream) -> CaseSetup:
    terms = rng.uniform(0.1, 1.0, (6,))
    names = ("adv", "temp", "l1", "per", "gram", "cx")

    def fn(t):
        total, _ = total_loss({n: t[i] for i, n in enumerate(names)}, LossWeights())
        return total

    return fn, [terms], ["terms"]


# ----------------------------------------------------------------------
# 反例: 故意写错的 VJP 必须被判为失败
# ----------------------------------------------------------------------

def corrupted_square(x) -> Tensor:
    x = as_tensor(x)

    def vjp(g, needs):
        return (g * x.data,)

    return record("corrupted_square", x.data ** 2, (x,), vjp)


_unary("corrupted_vjp", corrupted_square, lambda r: r.uniform(0.5, 1.5, (2, 3)))
CASES["corrupted_vjp"].group = NEGATIVE_GROUP


# ----------------------------------------------------------------------
# 运行
# ----------------------------------------------------------------------

def select_cases(names: Optional[Sequence[str]] = None, include_negative: bool = False) -> List[GradcheckCase]:
    if names:
        unknown = [n for n in names if n not in CASES]
        if unknown:
            raise ConfigError(f"未知的梯度检查用例: {unknown}，可选: {sorted(CASES)}")
        return [CASES[n] for n in names]
    return [c for c in CASES.values() if include_negative or c.group != NEGATIVE_GROUP]


def run_suite(
    seed: int = 0,
    names: Optional[Sequence[str]] = None,
    include_negative: bool = False,
    max_probes: int = 24,
    tolerance: float = DEFAULT_TOLERANCE,
    progress=None,
) -> List[GradcheckResult]:
    """
    在 f64 下运行选中的用例.

    Returns:
        List[GradcheckResult]: 按注册顺序排列的结果
    """
    cases = select_cases(names, include_negative)
    rng = RngStream(seed, "gradcheck")
    stage = "梯度检查"
    if progress is not None:
        progress.start_stage(stage, f"{len(cases)} 个用例（f64）", total=len(cases))
    results = []
    with default_dtype("f64"):
        for done, case in enumerate(cases, start=1):
            fn, inputs, input_names = case.build(rng.child(case.name))
            results.append(check_gradients(
                case.name, fn, inputs, rng.child(f"{case.name}.probes"),
                max_probes=max_probes, tolerance=tolerance, input_names=input_names,
            ))
            if progress is not None:
                progress.update_stage(stage, done, case.name, absolute=True)
    if progress is not None:
        progress.complete_stage(stage)
    return results


def result_rows(results: Sequence[GradcheckResult]) -> List[Tuple[str, str, str, str, str]]:
    group = {name: case.group for name, case in CASES.items()}
    return [
        (r.name, group.get(r.name, ""), f"{r.max_rel_error:.2e}", r.worst_input or "-", "✅" if r.passed else "❌")
        for r in results
    ]


def ensure_passed(results: Sequence[GradcheckResult]) -> None:
    failed = [r for r in results if not r.passed]
    if failed:
        details = ", ".join(f"{r.name}({r.max_rel_error:.2e} @ {r.worst_input})" for r in failed)
        raise GradcheckFailure(f"{len(failed)} 个梯度检查用例未通过: {details}", op=failed[0].name)
