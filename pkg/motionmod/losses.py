#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
六项训练目标: 对抗、时间对抗、L1、感知、Gram（风格）与上下文损失.
"""

from dataclasses import asdict, dataclass
from typing import Dict, Iterable, Sequence, Tuple, Union

import numpy as np

from .autograd import ops
from .autograd.tensor import Tensor, as_tensor
from .core.errors import ContractError
from .models.features import FeatureExtractor

TERM_NAMES = ("adv", "temp", "l1", "per", "gram", "cx")
GAN_FORMS = ("lsgan", "log")

PERCEPTUAL_TAP = "phi1"
GRAM_TAPS = ("phi1", "phi2")
CONTEXTUAL_TAPS = ("phi3", "phi4")

Scores = Union[Tensor, Sequence[Tensor]]


@dataclass
class LossWeights:
    """各项损失权重，默认 5/5/2/500/0.5/0.1."""

    adv: float = 5.0
    temp: float = 5.0
    l1: float = 2.0
    per: float = 500.0
    gram: float = 0.5
    cx: float = 0.1

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ContractError(f"损失权重 lambda_{name} 不能为负: {value}")

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def _as_list(scores: Scores) -> Tuple[Tensor, ...]:
    if isinstance(scores, Tensor):
        scores = (scores,)
    scores = tuple(as_tensor(s) for s in scores)
    if not scores or any(s.size == 0 for s in scores):
        raise ContractError("判别器得分为空")
    return scores


def _mean_over(items: Iterable[Tensor]) -> Tensor:
    items = list(items)
    total = items[0]
    for item in items[1:]:
        total = ops.add(total, item)
    return ops.div(total, float(len(items))) if len(items) > 1 else total


def discriminator_loss(real: Scores, fake: Scores, form: str = "lsgan") -> Tensor:
    """判别器损失；多组得分（如多个片段）取平均."""
    if form not in GAN_FORMS:
        raise ContractError(f"未知的 GAN 形式: {form}")
    terms = []
    for r, f in zip(_as_list(real), _as_list(fake)):
        if form == "lsgan":
            terms.append(ops.add(
                ops.mul(ops.mean(ops.square(ops.sub(r, 1.0))), 0.5),
                ops.mul(ops.mean(ops.square(f)), 0.5),
            ))
        else:
            terms.append(ops.add(ops.mean(ops.softplus(ops.neg(r))), ops.mean(ops.softplus(f))))
    return _mean_over(terms)


def generator_adv_loss(fake: Scores, form: str = "lsgan") -> Tensor:
    if form not in GAN_FORMS:
        raise ContractError(f"未知的 GAN 形式: {form}")
    terms = []
    for f in _as_list(fake):
        if form == "lsgan":
            terms.append(ops.mul(ops.mean(ops.square(ops.sub(f, 1.0))), 0.5))
        else:
            terms.append(ops.mean(ops.softplus(ops.neg(f))))
    return _mean_over(terms)


def gan_losses(real: Scores, fake: Scores, form: str = "lsgan") -> Tuple[Tensor, Tensor]:
    """
    返回 (loss_D, loss_G).

    least-squares: loss_D = ½E[(D(real)-1)²] + ½E[D(fake)²]，loss_G = ½E[(D(fake)-1)²].
    """
    return discriminator_loss(real, fake, form), generator_adv_loss(fake, form)


def _frames(x) -> Tensor:
    """[B,M,3,H,W] 展平为 [B*M,3,H,W]."""
    x = as_tensor(x)
    if x.ndim == 5:
        return ops.reshape(x, (x.shape[0] * x.shape[1],) + x.shape[2:])
    if x.ndim != 4:
        raise ContractError(f"需要图像 [B,3,H,W] 或视频 [B,M,3,H,W]，实际 {x.shape}")
    return x


def _check_pair(pred: Tensor, target: Tensor, op: str) -> None:
    if pred.shape != target.shape:
        raise ContractError(f"{op}: 生成 {pred.shape} 与真值 {target.shape} 形状不一致")


def l1_loss(pred, target) -> Tensor:
    pred, target = as_tensor(pred), as_tensor(target)
    _check_pair(pred, target, "l1_loss")
    return ops.mean(ops.absolute(ops.sub(pred, target)))


def perceptual_loss(pred, target, extractor: FeatureExtractor) -> Tensor:
    pred, target = _frames(pred), _frames(target)
    _check_pair(pred, target, "perceptual_loss")
    fp = extractor(pred, upto=PERCEPTUAL_TAP)[PERCEPTUAL_TAP]
    ft = extractor(target, upto=PERCEPTUAL_TAP)[PERCEPTUAL_TAP]
    return ops.mean(ops.absolute(ops.sub(fp, ft)))


def gram_matrix(feat) -> Tensor:
    """X·Xᵀ/(C·H·W)，[B,C,H,W] -> [B,C,C]."""
    feat = as_tensor(feat)
    b, c, h, w = feat.shape
    flat = ops.reshape(feat, (b, c, h * w))
    return ops.div(ops.einsum("bcn,bdn->bcd", flat, flat), float(c * h * w))


def gram_loss(pred, target, extractor: FeatureExtractor) -> Tensor:
    pred, target = _frames(pred), _frames(target)
    _check_pair(pred, target, "gram_loss")
    fp = extractor(pred, upto=GRAM_TAPS[-1])
    ft = extractor(target, upto=GRAM_TAPS[-1])
    terms = [
        ops.mean(ops.absolute(ops.sub(gram_matrix(fp[tap]), gram_matrix(ft[tap]))))
        for tap in GRAM_TAPS
    ]
    total = terms[0]
    for term in terms[1:]:
        total = ops.add(total, term)
    return total


def subsample_indices(count: int, limit: int) -> np.ndarray:
    """均匀间隔地选取不超过 limit 个位置."""
    if count <= limit:
        return np.arange(count)
    return np.unique(np.linspace(0, count - 1, limit).round().astype(np.int64))


def contextual_similarity(
    x, y, h: float = 0.5, eps: float = 1e-5, max_samples: int = 256
) -> Tensor:
    """
    上下文相似度 CX(X, Y)，逐样本返回 [B].

    Args:
        x: 生成图特征 [B,C,H,W]
        y: 真值特征 [B,C,H,W]
    """
    x, y = as_tensor(x), as_tensor(y)
    b, c = x.shape[:2]
    n = int(np.prod(x.shape[2:]))
    if n == 0 or c == 0:
        raise ContractError("contextual_loss: 特征集合为空")
    keep = subsample_indices(n, max_samples)
    xs = ops.reshape(x, (b, c, n))[:, :, keep]
    ys = ops.reshape(y, (b, c, n))[:, :, keep]

    center = ops.mean(ys, axis=2, keepdims=True)
    xs = ops.sub(xs, center)
    ys = ops.sub(ys, center)
    xn = ops.div(xs, ops.sqrt(ops.add(ops.sum(ops.square(xs), axis=1, keepdims=True), 1e-12)))
    yn = ops.div(ys, ops.sqrt(ops.add(ops.sum(ops.square(ys), axis=1, keepdims=True), 1e-12)))

    cosine = ops.einsum("bci,bcj->bij", xn, yn)
    dist = ops.sub(1.0, cosine)
    relative = ops.div(dist, ops.add(ops.amin(dist, axis=2, keepdims=True), eps))
    weights = ops.exp(ops.div(ops.sub(1.0, relative), h))
    cx = ops.div(weights, ops.sum(weights, axis=2, keepdims=True))
    return ops.mean(ops.amax(cx, axis=1), axis=1)


def contextual_loss(
    pred, target, extractor: FeatureExtractor, h: float = 0.5, max_samples: int = 256
) -> Tensor:
    pred, target = _frames(pred), _frames(target)
    _check_pair(pred, target, "contextual_loss")
    fp = extractor(pred, upto=CONTEXTUAL_TAPS[-1])
    ft = extractor(target, upto=CONTEXTUAL_TAPS[-1])
    total = None
    for tap in CONTEXTUAL_TAPS:
        cx = contextual_similarity(fp[tap], ft[tap], h=h, max_samples=max_samples)
        term = ops.mean(ops.neg(ops.log(cx)))
        total = term if total is None else ops.add(total, term)
    return total


def total_loss(terms: Dict[str, Tensor], weights: LossWeights) -> Tuple[Tensor, Dict[str, Tensor]]:
    """
    λ 加权求和.

    Args:
        terms: 项名 -> 标量损失；缺失的项视为 0

    Returns:
        (总损失, 项名 -> 加权后的标量)
    """
    unknown = set(terms) - set(TERM_NAMES)
    if unknown:
        raise ContractError(f"未知的损失项: {sorted(unknown)}")
    lambdas = weights.as_dict()
    weighted: Dict[str, Tensor] = {}
    total = None
    for name in TERM_NAMES:
        if name not in terms:
            weighted[name] = Tensor(0.0)
            continue
        weighted[name] = ops.mul(as_tensor(terms[name]), lambdas[name])
        total = weighted[name] if total is None else ops.add(total, weighted[name])
    if total is None:
        total = Tensor(0.0)
    return total, weighted
