#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
合成数据集的生成、存储与读取.

目录布局:
    <dataset>/dataset.txt
    <dataset>/<split>/seq_NNNN/source.ppm
                               frame_001.ppm ... frame_M.ppm
                               pose_000.dmmt（源姿态 P_s）, pose_001.dmmt ...
                               flow_001.dmmt ...
                               meta.txt
"""

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..autograd.random import RngStream
from ..autograd.serialize import load_tensor, save_tensor
from ..core.errors import ConfigError, ContractError, DataIOError, NumericalError, SpriteOutOfBoundsError
from ..utils.file_ops import FileOperations
from ..utils.worker_pool import WorkerPool
from .image_io import load_ppm, save_ppm
from .sprites import (
    PoseNoise,
    SpriteSequence,
    render_sequence,
    sample_motion_track,
    sample_occluder,
    sample_sprite_spec,
)

SPLITS = ("train", "test")
MARKER = "dataset.txt"
MAX_ATTEMPTS = 8

PathLike = Union[str, Path]


def sequence_dir(root: PathLike, split: str, index: int) -> Path:
    return Path(root) / split / f"seq_{index:04d}"


def format_drop_record(dropped: Sequence[Sequence[int]]) -> str:
    """丢弃记录: 逗号分隔的 帧:关键点 对，帧号从 1 开始."""
    return ",".join(f"{i}:{k}" for i, kps in enumerate(dropped, start=1) for k in kps)


def parse_drop_record(text: str, length: int) -> List[List[int]]:
    dropped: List[List[int]] = [[] for _ in range(length)]
    for pair in filter(None, (p.strip() for p in text.split(","))):
        try:
            frame, kp = (int(v) for v in pair.split(":"))
        except ValueError:
            raise DataIOError(f"无法解析丢弃记录 {pair!r}")
        if not 1 <= frame <= length:
            raise DataIOError(f"丢弃记录帧号 {frame} 超出序列长度 {length}")
        dropped[frame - 1].append(kp)
    return dropped


def write_key_values(path: Path, values: Dict[str, object]) -> None:
    lines = [f"{key}={value}" for key, value in values.items()]
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise DataIOError(f"无法写入 {path}: {e}")


def read_key_values(path: Path) -> Dict[str, str]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataIOError(f"无法读取 {path}: {e}")
    values = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataIOError(f"{path} 中的行缺少 '=': {line!r}")
        values[key.strip()] = value.strip()
    return values


def synthesize_sequence(config, split: str, index: int) -> SpriteSequence:
    """由 (seed, split, index) 确定地生成一条序列；失败时换用下一个尝试子流."""
    length = config.train_seq_len if split == "train" else config.test_seq_len
    base = RngStream(config.seed, f"{split}/{index:04d}")
    noise = PoseNoise(config.p_drop, config.sigma_jitter)
    last_error: Optional[Exception] = None
    for attempt in range(MAX_ATTEMPTS):
        rng = base.child(f"attempt{attempt}")
        spec = sample_sprite_spec(rng.child("spec"), config.resolution)
        track = sample_motion_track(rng.child("track"), spec, config.resolution)
        occluder = sample_occluder(rng.child("occluder"), length, config.resolution) if config.occlusion else None
        try:
            return render_sequence(
                spec, track, length, rng, resolution=config.resolution, noise=noise, occluder=occluder
            )
        except (SpriteOutOfBoundsError, NumericalError) as e:
            last_error = e
    raise NumericalError(f"序列 {split}/{index:04d} 在 {MAX_ATTEMPTS} 次尝试后仍未通过检查: {last_error}")


def write_sequence(directory: Path, sequence: SpriteSequence, meta: Dict[str, object]) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    save_ppm(directory / "source.ppm", sequence.source)
    save_tensor(directory / "pose_000.dmmt", sequence.source_pose.astype(np.float32))
    for i in range(sequence.length):
        save_ppm(directory / f"frame_{i + 1:03d}.ppm", sequence.frames[i])
        save_tensor(directory / f"pose_{i + 1:03d}.dmmt", sequence.poses[i].astype(np.float32))
        save_tensor(directory / f"flow_{i + 1:03d}.dmmt", sequence.flows[i].astype(np.float32))
    write_key_values(directory / "meta.txt", {**meta, "dropped": format_drop_record(sequence.dropped)})


def read_sequence(directory: Path) -> SpriteSequence:
    if not directory.is_dir():
        raise DataIOError(f"序列目录不存在: {directory}")
    meta = read_key_values(directory / "meta.txt")
    try:
        length = int(meta["M"])
    except (KeyError, ValueError):
        raise DataIOError(f"{directory}/meta.txt 缺少有效的 M")
    frames = np.stack([load_ppm(directory / f"frame_{i:03d}.ppm") for i in range(1, length + 1)])
    poses = np.stack([load_tensor(directory / f"pose_{i:03d}.dmmt") for i in range(1, length + 1)])
    flows = np.stack([load_tensor(directory / f"flow_{i:03d}.dmmt") for i in range(1, length + 1)])
    return SpriteSequence(
        source=load_ppm(directory / "source.ppm"),
        source_pose=load_tensor(directory / "pose_000.dmmt"),
        poses=poses,
        flows=flows,
        frames=frames,
        dropped=parse_drop_record(meta.get("dropped", ""), length),
    )


def generate_dataset(config, progress=None) -> Path:
    """
    生成训练/测试划分，先写入暂存目录，全部成功后再替换目标目录.

    Args:
        config: RunConfig
        progress: 可选的 ProgressManager

    Returns:
        Path: 数据集目录
    """
    if config.train_seq_len % 2 or config.test_seq_len % 2:
        raise ConfigError("序列长度必须为偶数")
    target = Path(config.dataset)
    if target.exists() and any(target.iterdir()) and not (target / MARKER).exists():
        raise DataIOError(f"{target} 非空且不是数据集目录，拒绝覆盖")

    files = FileOperations()
    staging = files.staging_dir(target)
    jobs: List[Tuple[str, int]] = [
        (split, k) for split, count in (("train", config.n_train), ("test", config.n_test)) for k in range(count)
    ]

    def build(job: Tuple[str, int]) -> int:
        split, k = job
        sequence = synthesize_sequence(config, split, k)
        write_sequence(sequence_dir(staging, split, k), sequence, {
            "seed": config.seed,
            "split": split,
            "index": k,
            "M": sequence.length,
            "resolution": config.resolution,
            "p_drop": config.p_drop,
            "sigma_jitter": config.sigma_jitter,
            "occlusion": str(bool(config.occlusion)).lower(),
        })
        return k

    stage = "生成数据"
    if progress is not None:
        progress.start_stage(stage, f"{config.n_train} 训练 / {config.n_test} 测试序列", total=len(jobs))
    try:
        with WorkerPool(progress) as pool:
            pool.map(build, jobs, stage=stage)
        for split in SPLITS:
            files.ensure_dir(staging / split)
        write_key_values(staging / MARKER, {
            "seed": config.seed,
            "resolution": config.resolution,
            "n_train": config.n_train,
            "n_test": config.n_test,
            "train_seq_len": config.train_seq_len,
            "test_seq_len": config.test_seq_len,
            "p_drop": config.p_drop,
            "sigma_jitter": config.sigma_jitter,
            "occlusion": str(bool(config.occlusion)).lower(),
        })
    except BaseException:
        files.cleanup_temp_dir(staging)
        raise
    files.commit_staging(staging, target)
    if progress is not None:
        progress.complete_stage(stage)
    return target


@dataclass
class Batch:
    """一批 M 帧窗口."""

    source: np.ndarray
    source_pose: np.ndarray
    poses: np.ndarray
    flows: np.ndarray
    frames: np.ndarray
    dropped: np.ndarray
    ids: List[Tuple[int, int]]

    def cast(self, dtype) -> "Batch":
        return Batch(
            self.source.astype(dtype), self.source_pose.astype(dtype), self.poses.astype(dtype),
            self.flows.astype(dtype), self.frames.astype(dtype), self.dropped, self.ids,
        )


def stack_windows(windows: Sequence[SpriteSequence], ids: List[Tuple[int, int]]) -> Batch:
    return Batch(
        source=np.stack([w.source for w in windows]),
        source_pose=np.stack([w.source_pose for w in windows]),
        poses=np.stack([w.poses for w in windows]),
        flows=np.stack([w.flows for w in windows]),
        frames=np.stack([w.frames for w in windows]),
        dropped=np.stack([w.dropped_frames() for w in windows]),
        ids=ids,
    )


class SpriteDataset:
    """
    读取一个划分下的序列，带缓存.

    Args:
        root: 数据集目录
        split: train 或 test
        cache_size: 缓存的序列数
    """

    def __init__(self, root: PathLike, split: str = "train", cache_size: int = 256):
        if split not in SPLITS:
            raise ConfigError(f"未知的数据划分: {split}")
        self.root = Path(root)
        self.split = split
        if not (self.root / MARKER).exists():
            raise DataIOError(f"{self.root} 不是数据集目录（缺少 {MARKER}），请先运行 gen-data")
        self.info = read_key_values(self.root / MARKER)
        split_dir = self.root / split
        self.directories = sorted(p for p in split_dir.glob("seq_*") if p.is_dir()) if split_dir.is_dir() else []
        self._load = lru_cache(maxsize=cache_size)(self._read)

    def __len__(self) -> int:
        return len(self.directories)

    def _read(self, index: int) -> SpriteSequence:
        return read_sequence(self.directories[index])

    def load(self, index: int) -> SpriteSequence:
        if not 0 <= index < len(self):
            raise ContractError(f"序列号 {index} 超出 {self.split} 划分范围 [0, {len(self)})")
        return self._load(index)

    def sample_batch(self, rng: RngStream, batch_size: int, window: int, pool: Optional[WorkerPool] = None) -> Batch:
        """随机抽取 batch_size 个连续 window 帧窗口."""
        if len(self) == 0:
            raise DataIOError(f"{self.split} 划分为空")
        ids = []
        for _ in range(batch_size):
            index = rng.integers(0, len(self))
            length = self.sequence_length(index)
            if length < window:
                raise ConfigError(f"序列长度 {length} 小于窗口 {window}")
            ids.append((index, rng.integers(0, length - window + 1)))
        loader = pool.map if pool is not None else (lambda fn, items: [fn(i) for i in items])
        sequences = loader(self.load, [i for i, _ in ids])
        return stack_windows([seq.window(start, window) for seq, (_, start) in zip(sequences, ids)], ids)

    def sequence_length(self, index: int) -> int:
        key = "train_seq_len" if self.split == "train" else "test_seq_len"
        if key in self.info:
            return int(self.info[key])
        return self.load(index).length
