#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Fréchet 特征距离.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..core.errors import ContractError, NumericalError

SHRINKAGE = 1e-6
NEGATIVE_EIGEN_TOLERANCE = 1e-8


@dataclass
class FrechetResult:
    """距离 d² 及协方差是否退化（样本数不足 d+1 时做了收缩）."""

    value: float
    degenerate: bool = False


def _sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = linalg.eigh(matrix)
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def frechet_feature_distance(set_a: np.ndarray, set_b: np.ndarray) -> FrechetResult:
    """
    d² = ||μ_A−μ_B||² + Tr(Σ_A + Σ_B − 2(Σ_A Σ_B)^{1/2}).

    迹项通过对称矩阵 Σ_A^{1/2} Σ_B Σ_A^{1/2} 的特征分解计算.

    Args:
        set_a: [N, d]
        set_b: [N', d]
    """
    a = np.asarray(set_a, dtype=np.float64)
    b = np.asarray(set_b, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ContractError(f"特征集合维度不一致: {a.shape} vs {b.shape}")
    if min(len(a), len(b)) < 2:
        raise ContractError("每个特征集合至少需要 2 个样本")
    d = a.shape[1]
    degenerate = min(len(a), len(b)) < d + 1

    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    sigma_a = np.atleast_2d(np.cov(a, rowvar=False))
    sigma_b = np.atleast_2d(np.cov(b, rowvar=False))
    if degenerate:
        sigma_a = sigma_a + SHRINKAGE * np.eye(d)
        sigma_b = sigma_b + SHRINKAGE * np.eye(d)

    root_a = _sqrt_psd(sigma_a)
    middle = root_a @ sigma_b @ root_a
    middle = 0.5 * (middle + middle.T)
    eigvals = linalg.eigvalsh(middle)
    scale = max(1.0, float(np.abs(eigvals).max(initial=0.0)))
    if eigvals.min(initial=0.0) < -NEGATIVE_EIGEN_TOLERANCE * scale:
        raise NumericalError(f"协方差乘积出现显著负特征值 {eigvals.min():.3e}", op="frechet")
    trace_sqrt = float(np.sqrt(np.clip(eigvals, 0.0, None)).sum())

    diff = mu_a - mu_b
    value = float(diff @ diff + np.trace(sigma_a) + np.trace(sigma_b) - 2.0 * trace_sqrt)
    return FrechetResult(max(value, 0.0), degenerate)
