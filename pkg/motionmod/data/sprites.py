#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
合成精灵视频: 带精确真值位移场的相似变换运动，以及被扰动的姿态热图.

坐标约定与 ops.sampling 一致: 像素中心为整数，(x, y) = (列, 行).
精灵局部坐标 q 到画布 p 的映射为 A_i(q) = c_i + s_i·R(θ_i)·q，第 0 帧即源图配置.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from ..autograd.random import RngStream
from ..autograd.tensor import Tensor, no_grad
from ..core.errors import ContractError, NumericalError, SpriteOutOfBoundsError
from ..ops.sampling import warp

KEYPOINT_NAMES = ("top_left", "top_right", "bottom_right", "bottom_left", "center")
HEATMAP_SIGMA = 1.5
SAFE_MARGIN = 2.0
INTERIOR_MARGIN_PX = 2.5
WARP_CONSISTENCY_LIMIT = 0.02

Color = Tuple[float, float, float]


@dataclass
class SpriteSpec:
    """精灵外观: 形状、条纹纹理、尺寸与背景."""

    shape: str = "rectangle"
    width: float = 16.0
    height: float = 16.0
    stripe_period: float = 16.0
    stripe_phase: float = 0.0
    stripe_angle: float = 0.0
    color_a: Color = (0.8, 0.3, 0.2)
    color_b: Color = (0.3, 0.5, 0.8)
    background: str = "flat"
    background_level: float = 0.9
    checker_period: int = 8

    def __post_init__(self):
        if self.shape not in ("rectangle", "ellipse"):
            raise ContractError(f"未知的精灵形状: {self.shape}")
        if min(self.width, self.height) < 8:
            raise ContractError(f"精灵尺寸至少 8 px，实际 {self.width}x{self.height}")
        if self.stripe_period < 2:
            raise ContractError(f"条纹周期至少 2 px，实际 {self.stripe_period}")
        if self.background not in ("flat", "checker"):
            raise ContractError(f"未知的背景类型: {self.background}")

    def contains(self, q: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """局部坐标 q [2, ...] 是否位于（向内收缩 margin 的）形状内."""
        hw = self.width / 2.0 - margin
        hh = self.height / 2.0 - margin
        if hw <= 0 or hh <= 0:
            return np.zeros(q.shape[1:], dtype=bool)
        if self.shape == "rectangle":
            return (np.abs(q[0]) <= hw) & (np.abs(q[1]) <= hh)
        return (q[0] / hw) ** 2 + (q[1] / hh) ** 2 <= 1.0

    def corners(self) -> np.ndarray:
        """TL, TR, BR, BL 的局部坐标，[4, 2]."""
        hw, hh = self.width / 2.0, self.height / 2.0
        return np.array([(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)])

    def texture_raster(self, pad: int = 3) -> Tuple[np.ndarray, np.ndarray]:
        """
        在整数纹素上栅格化的条纹纹理.

        Returns:
            (raster [3, Ht, Wt], origin (x, y)，即纹素 (0,0) 的局部坐标)
        """
        hw = int(math.ceil(self.width / 2.0)) + pad
        hh = int(math.ceil(self.height / 2.0)) + pad
        ys, xs = np.meshgrid(np.arange(-hh, hh + 1), np.arange(-hw, hw + 1), indexing="ij")
        along = xs * math.cos(self.stripe_angle) + ys * math.sin(self.stripe_angle)
        t = 0.5 + 0.5 * np.sin(2.0 * math.pi * along / self.stripe_period + self.stripe_phase)
        a = np.asarray(self.color_a)[:, None, None]
        b = np.asarray(self.color_b)[:, None, None]
        return a * (1.0 - t) + b * t, np.array([-hw, -hh], dtype=np.float64)

    def background_image(self, resolution: int) -> np.ndarray:
        if self.background == "flat":
            return np.full((3, resolution, resolution), self.background_level)
        ys, xs = np.mgrid[0:resolution, 0:resolution]
        cells = ((xs // self.checker_period) + (ys // self.checker_period)) % 2
        level = np.where(cells == 0, self.background_level, self.background_level - 0.25)
        return np.repeat(level[None].astype(np.float64), 3, axis=0)


@dataclass
class MotionTrack:
    """
    逐帧相似变换: 平移为线性项加正弦，旋转线性，缩放为 [0.8, 1.2] 内的正弦.
    """

    center: Tuple[float, float] = (32.0, 32.0)
    velocity: Tuple[float, float] = (0.0, 0.0)
    amplitude: Tuple[float, float] = (0.0, 0.0)
    frequency: Tuple[float, float] = (0.0, 0.0)
    phase: Tuple[float, float] = (0.0, 0.0)
    theta0: float = 0.0
    omega: float = 0.0
    scale_amplitude: float = 0.0
    scale_frequency: float = 0.0
    scale_phase: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.scale_amplitude <= 0.2:
            raise ContractError(f"缩放幅度需在 [0, 0.2] 内，实际 {self.scale_amplitude}")

    def translation(self, i: int) -> np.ndarray:
        return np.array([
            self.center[k] + self.velocity[k] * i
            + self.amplitude[k] * math.sin(self.frequency[k] * i + self.phase[k])
            for k in range(2)
        ])

    def rotation(self, i: int) -> float:
        return self.theta0 + self.omega * i

    def scale(self, i: int) -> float:
        return 1.0 + self.scale_amplitude * math.sin(self.scale_frequency * i + self.scale_phase)

    def _matrix(self, i: int) -> np.ndarray:
        theta, s = self.rotation(i), self.scale(i)
        c, sn = math.cos(theta), math.sin(theta)
        return s * np.array([[c, -sn], [sn, c]])

    def forward(self, i: int, q: np.ndarray) -> np.ndarray:
        """A_i: 局部坐标 [2, ...] -> 画布坐标."""
        m = self._matrix(i)
        t = self.translation(i)
        return np.tensordot(m, q, axes=1) + t.reshape((2,) + (1,) * (q.ndim - 1))

    def inverse(self, i: int, p: np.ndarray) -> np.ndarray:
        """A_i⁻¹: 画布坐标 [2, ...] -> 局部坐标."""
        m_inv = np.linalg.inv(self._matrix(i))
        t = self.translation(i)
        return np.tensordot(m_inv, p - t.reshape((2,) + (1,) * (p.ndim - 1)), axes=1)

    def flow_at(self, i: int, p: np.ndarray) -> np.ndarray:
        """F_{i->s}(p) = A_s(A_i⁻¹(p)) - p."""
        return self.forward(0, self.inverse(i, p)) - p


@dataclass
class PoseNoise:
    """姿态扰动: 关键点丢弃概率与抖动标准差（像素）."""

    p_drop: float = 0.15
    sigma_jitter: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p_drop <= 1.0:
            raise ContractError(f"p_drop 需在 [0, 1] 内，实际 {self.p_drop}")
        if self.sigma_jitter < 0:
            raise ContractError(f"sigma_jitter 不能为负，实际 {self.sigma_jitter}")


@dataclass
class Occluder:
    """在第 1..M 帧中线性穿过画布的不透明纯色矩形."""

    start: Tuple[float, float]
    velocity: Tuple[float, float]
    size: Tuple[float, float] = (10.0, 28.0)
    color: Color = (0.15, 0.15, 0.15)

    def covers(self, i: int, grid: np.ndarray) -> np.ndarray:
        cx = self.start[0] + self.velocity[0] * i
        cy = self.start[1] + self.velocity[1] * i
        return (np.abs(grid[0] - cx) <= self.size[0] / 2) & (np.abs(grid[1] - cy) <= self.size[1] / 2)


@dataclass
class SpriteSequence:
    """
    一条合成序列. 帧下标 1..M 对应数组下标 0..M-1.
    """

    source: np.ndarray
    source_pose: np.ndarray
    poses: np.ndarray
    flows: np.ndarray
    frames: np.ndarray
    dropped: List[List[int]] = field(default_factory=list)
    interior: Optional[np.ndarray] = None

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    def dropped_frames(self) -> np.ndarray:
        """每帧是否至少丢弃了一个关键点."""
        return np.array([len(d) > 0 for d in self.dropped], dtype=bool)

    def window(self, start: int, length: int) -> "SpriteSequence":
        if start < 0 or start + length > self.length:
            raise ContractError(f"窗口 [{start}, {start + length}) 超出序列长度 {self.length}")
        sl = slice(start, start + length)
        return SpriteSequence(
            self.source, self.source_pose, self.poses[sl], self.flows[sl], self.frames[sl],
            self.dropped[sl], None if self.interior is None else self.interior[sl],
        )


def _pixel_grid(resolution: int) -> np.ndarray:
    ys, xs = np.meshgrid(np.arange(resolution, dtype=np.float64), np.arange(resolution, dtype=np.float64), indexing="ij")
    return np.stack([xs, ys])


def check_safe_area(spec: SpriteSpec, track: MotionTrack, frames: int, resolution: int) -> None:
    """第 0..frames 帧的包围矩形角点都必须距画布边界至少 2 px."""
    corners = spec.corners().T
    low, high = SAFE_MARGIN, resolution - 1 - SAFE_MARGIN
    for i in range(frames + 1):
        pts = track.forward(i, corners)
        if pts.min() < low or pts.max() > high:
            raise SpriteOutOfBoundsError(
                f"精灵在第 {i} 帧离开安全区: 角点范围 [{pts.min():.2f}, {pts.max():.2f}]，"
                f"允许 [{low}, {high}]"
            )


def render_frame(
    spec: SpriteSpec,
    track: MotionTrack,
    i: int,
    resolution: int,
    occluder: Optional[Occluder] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    渲染第 i 帧: 画布像素经 A_i⁻¹ 映射到纹理空间后双线性取值.

    Returns:
        (image [3,H,W], sprite_mask [H,W])
    """
    grid = _pixel_grid(resolution)
    q = track.inverse(i, grid)
    inside = spec.contains(q)
    raster, origin = spec.texture_raster()
    rows = q[1] - origin[1]
    cols = q[0] - origin[0]
    texture = np.stack([
        ndimage.map_coordinates(raster[c], [rows, cols], order=1, mode="nearest")
        for c in range(3)
    ])
    image = np.where(inside[None], texture, spec.background_image(resolution))
    if occluder is not None and i > 0:
        covered = occluder.covers(i, grid)
        image = np.where(covered[None], np.asarray(occluder.color)[:, None, None], image)
        inside = inside & ~covered
    return image, inside


def ground_truth_flow(
    spec: SpriteSpec,
    track: MotionTrack,
    i: int,
    resolution: int,
    occluder: Optional[Occluder] = None,
) -> np.ndarray:
    """精灵内部 F(p) = A_s(A_i⁻¹(p)) - p，其它位置为 0；返回 [2,H,W]."""
    grid = _pixel_grid(resolution)
    inside = spec.contains(track.inverse(i, grid))
    if occluder is not None and i > 0:
        inside &= ~occluder.covers(i, grid)
    return np.where(inside[None], track.flow_at(i, grid), 0.0)


def interior_mask(
    spec: SpriteSpec,
    track: MotionTrack,
    i: int,
    resolution: int,
    occluder: Optional[Occluder] = None,
) -> np.ndarray:
    """在第 i 帧与源帧中都距精灵边缘至少 2.5 px 的像素."""
    grid = _pixel_grid(resolution)
    margin = INTERIOR_MARGIN_PX / min(track.scale(i), track.scale(0))
    mask = spec.contains(track.inverse(i, grid), margin)
    if occluder is not None and i > 0:
        mask &= ~occluder.covers(i, grid)
    return mask


def keypoints(spec: SpriteSpec, track: MotionTrack, i: int) -> np.ndarray:
    """第 i 帧 5 个关键点的画布坐标 [5, 2]，顺序 TL, TR, BR, BL, center."""
    local = np.vstack([spec.corners(), np.zeros((1, 2))]).T
    return track.forward(i, local).T


def render_heatmap(points: np.ndarray, resolution: int, sigma: float = HEATMAP_SIGMA) -> np.ndarray:
    """每个关键点一个高斯通道，NaN 坐标表示该通道置零."""
    grid = _pixel_grid(resolution)
    maps = np.zeros((len(points), resolution, resolution))
    for k, (x, y) in enumerate(points):
        if np.isnan(x):
            continue
        maps[k] = np.exp(-((grid[0] - x) ** 2 + (grid[1] - y) ** 2) / (2.0 * sigma * sigma))
    return maps


def render_pose(
    spec: SpriteSpec,
    track: MotionTrack,
    i: int,
    noise: PoseNoise,
    rng: RngStream,
    resolution: int,
) -> Tuple[np.ndarray, List[int]]:
    """
    带扰动的姿态热图: 每个关键点独立地以 p_drop 概率丢弃，否则加各向同性高斯抖动.

    Returns:
        (heatmap [Kp,H,W], 被丢弃的关键点下标)
    """
    points = keypoints(spec, track, i).copy()
    dropped: List[int] = []
    for k in range(len(points)):
        if rng.random() < noise.p_drop:
            points[k] = np.nan
            dropped.append(k)
        elif noise.sigma_jitter > 0:
            points[k] += rng.normal(2) * noise.sigma_jitter
    return render_heatmap(points, resolution), dropped


def warp_consistency(source: np.ndarray, frame: np.ndarray, flow: np.ndarray, interior: np.ndarray) -> float:
    """源图按真值位移场反向变形后与目标帧在内部像素上的平均 L1."""
    if not interior.any():
        return 0.0
    # 与生成器训练时使用同一个 warp（画布外取 0）
    with no_grad():
        warped = warp(
            Tensor(np.asarray(flow, dtype=np.float64)[None], dtype=np.float64),
            Tensor(np.asarray(source, dtype=np.float64)[None], dtype=np.float64),
        ).data[0]
    return float(np.abs(warped - frame)[:, interior].mean())


def render_sequence(
    spec: SpriteSpec,
    track: MotionTrack,
    length: int,
    rng: RngStream,
    resolution: int = 64,
    noise: Optional[PoseNoise] = None,
    occluder: Optional[Occluder] = None,
    quantize: bool = True,
) -> SpriteSequence:
    """
    渲染一条序列并在生成时检查变形一致性.

    Args:
        length: 目标帧数 M（偶数，至少 2）
        rng: 本序列的姿态噪声随机流
        quantize: 按 8 位量化图像（与 PPM 存储一致）
    """
    if length < 2 or length % 2:
        raise ContractError(f"序列长度 M 必须为不小于 2 的偶数，实际 {length}")
    noise = noise or PoseNoise()
    check_safe_area(spec, track, length, resolution)

    def finish(image: np.ndarray) -> np.ndarray:
        return np.round(image * 255.0) / 255.0 if quantize else image

    source, _ = render_frame(spec, track, 0, resolution)
    source = finish(source)
    source_pose = render_heatmap(keypoints(spec, track, 0), resolution)

    frames, poses, flows, interiors, dropped = [], [], [], [], []
    pose_rng = rng.child("pose")
    for i in range(1, length + 1):
        image, _ = render_frame(spec, track, i, resolution, occluder)
        frames.append(finish(image))
        flows.append(ground_truth_flow(spec, track, i, resolution, occluder))
        interiors.append(interior_mask(spec, track, i, resolution, occluder))
        heatmap, lost = render_pose(spec, track, i, noise, pose_rng, resolution)
        poses.append(heatmap)
        dropped.append(lost)

    for i, (frame, flow, interior) in enumerate(zip(frames, flows, interiors), start=1):
        error = warp_consistency(source, frame, flow, interior)
        if error >= WARP_CONSISTENCY_LIMIT:
            raise NumericalError(f"第 {i} 帧变形一致性 L1={error:.4f} 超过 {WARP_CONSISTENCY_LIMIT}")

    return SpriteSequence(
        source=source,
        source_pose=source_pose,
        poses=np.stack(poses),
        flows=np.stack(flows),
        frames=np.stack(frames),
        dropped=dropped,
        interior=np.stack(interiors),
    )


def sample_sprite_spec(rng: RngStream, resolution: int = 64) -> SpriteSpec:
    """随机外观: 尺寸约为画布的 0.2-0.3，条纹周期 16-32 px，对比度不超过 0.35."""
    size_low, size_high = max(8.0, 0.2 * resolution), max(8.0, 0.3 * resolution)
    base = rng.uniform(0.25, 0.75, size=3)
    direction = rng.normal(3)
    direction /= np.linalg.norm(direction) + 1e-12
    contrast = rng.uniform(0.15, 0.35)
    color_a = np.clip(base - 0.5 * contrast * direction, 0.0, 1.0)
    color_b = np.clip(base + 0.5 * contrast * direction, 0.0, 1.0)
    return SpriteSpec(
        shape=rng.choice(("rectangle", "ellipse")),
        width=float(rng.uniform(size_low, size_high)),
        height=float(rng.uniform(size_low, size_high)),
        stripe_period=float(rng.uniform(16.0, 32.0)),
        stripe_phase=float(rng.uniform(0.0, 2.0 * math.pi)),
        stripe_angle=float(rng.uniform(0.0, math.pi)),
        color_a=tuple(float(c) for c in color_a),
        color_b=tuple(float(c) for c in color_b),
        background=rng.choice(("flat", "checker")),
        background_level=float(rng.uniform(0.8, 0.95)),
        checker_period=int(rng.integers(6, 12)),
    )


def sample_motion_track(rng: RngStream, spec: SpriteSpec, resolution: int = 64) -> MotionTrack:
    """随机运动，振幅按包围圆半径收缩以保证任意帧都在安全区内."""
    radius = 1.2 * math.hypot(spec.width, spec.height) / 2.0
    slack = resolution / 2.0 - 0.5 - SAFE_MARGIN - radius - 0.5
    if slack <= 0:
        raise SpriteOutOfBoundsError(f"精灵过大，无法在 {resolution} px 画布内运动")
    amplitude = tuple(float(rng.uniform(0.4, 0.8) * slack) for _ in range(2))
    offset = tuple(float(rng.uniform(-1.0, 1.0) * (slack - a)) for a in amplitude)
    middle = (resolution - 1) / 2.0
    return MotionTrack(
        center=(middle + offset[0], middle + offset[1]),
        amplitude=amplitude,
        frequency=tuple(float(rng.uniform(0.1, 0.35)) for _ in range(2)),
        phase=tuple(float(rng.uniform(0.0, 2.0 * math.pi)) for _ in range(2)),
        theta0=float(rng.uniform(-0.5, 0.5)),
        omega=float(rng.uniform(-0.08, 0.08)),
        scale_amplitude=float(rng.uniform(0.0, 0.2)),
        scale_frequency=float(rng.uniform(0.1, 0.3)),
        scale_phase=float(rng.uniform(0.0, 2.0 * math.pi)),
    )


def sample_occluder(rng: RngStream, length: int, resolution: int = 64) -> Occluder:
    """从左向右（或反向）匀速穿过画布的遮挡物."""
    direction = 1.0 if rng.random() < 0.5 else -1.0
    start_x = -8.0 if direction > 0 else resolution + 8.0
    speed = (resolution + 16.0) / (length + 1)
    return Occluder(
        start=(start_x, float(rng.uniform(0.3, 0.7) * resolution)),
        velocity=(direction * speed, 0.0),
    )
