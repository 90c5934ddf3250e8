"""
合成精灵数据
"""

from .dataset import Batch, SpriteDataset, generate_dataset, read_sequence, stack_windows
from .sprites import (
    MotionTrack,
    Occluder,
    PoseNoise,
    SpriteSequence,
    SpriteSpec,
    ground_truth_flow,
    render_pose,
    render_sequence,
)

__all__ = [
    "Batch",
    "SpriteDataset",
    "generate_dataset",
    "read_sequence",
    "stack_windows",
    "MotionTrack",
    "Occluder",
    "PoseNoise",
    "SpriteSequence",
    "SpriteSpec",
    "ground_truth_flow",
    "render_pose",
    "render_sequence",
]
