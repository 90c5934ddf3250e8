#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
训练规模的验收测试，只在 --runslow 下运行.
"""

import pytest

from motionmod.ablation import run_ablation
from motionmod.autograd.random import RngStream
from motionmod.core.config import RunConfig
from motionmod.data.dataset import SpriteDataset, generate_dataset
from motionmod.metrics import CopySourceModel, GeneratorModel, evaluate_run
from motionmod.models.features import FeatureExtractor
from motionmod.trainer import Trainer

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def toy_config(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    config = RunConfig(
        resolution=32,
        window=4,
        batch_size=2,
        iterations=300,
        checkpoint_interval=100,
        n_train=16,
        n_test=4,
        train_seq_len=8,
        test_seq_len=8,
        d_style=8,
        branch_channels=4,
        level_channels=(16, 8, 8),
        max_offset=4.0,
        cx_max_samples=64,
        temporal_clip=4,
        render_pixel=(16, 16),
        lr=5e-4,
        dataset=str(root / "data"),
        output_dir=str(root / "run"),
    )
    generate_dataset(config)
    return config


def test_trained_generator_beats_copying_the_source(toy_config):
    trainer = Trainer(toy_config)
    trainer.fit(SpriteDataset(toy_config.dataset, "train"), toy_config.output_dir)
    test = SpriteDataset(toy_config.dataset, "test")
    extractor = FeatureExtractor(toy_config.seed)

    def l1_of(model):
        report = evaluate_run(model, test, extractor, RngStream(0, "eval"), repetitions=1, clip_length=4)
        return report.summary()["l1"]

    assert l1_of(GeneratorModel(trainer.generator, toy_config.window)) < l1_of(CopySourceModel())


def test_losses_stay_finite_for_every_variant(toy_config, tmp_path):
    train = SpriteDataset(toy_config.dataset, "train")
    for flag in ("no_dmm", "no_dcn", "no_style", "no_mask", "no_forward", "no_backward",
                 "no_concat", "no_structural_recurrence"):
        config = toy_config.replace(iterations=5, checkpoint_interval=5, output_dir=str(tmp_path / flag), **{flag: True})
        result = Trainer(config).fit(train, config.output_dir)
        assert result.iterations == 5


@pytest.fixture(scope="module")
def ablation_config(tmp_path_factory, toy_config):
    root = tmp_path_factory.mktemp("ablation")
    config = toy_config.replace(n_test=20, ablate_seeds=3, dataset=str(root / "data"), output_dir=str(root / "run"))
    generate_dataset(config)
    return config


def test_full_model_beats_ablations_on_dropped_poses(ablation_config):
    result = run_ablation(ablation_config, ablation_config.output_dir, variants=["full", "no_backward", "no_dmm"])
    dropped = {variant: values["l1_dropped"] for variant, values in result.rows.items()}
    assert dropped["full"] < dropped["no_backward"]
    assert dropped["full"] < dropped["no_dmm"]


def test_train_and_eval_are_reproducible(toy_config, tmp_path):
    def train_and_eval(name):
        config = toy_config.replace(iterations=20, checkpoint_interval=20, output_dir=str(tmp_path / name))
        trainer = Trainer(config)
        trainer.fit(SpriteDataset(config.dataset, "train"), config.output_dir)
        report = evaluate_run(GeneratorModel(trainer.generator, config.window), SpriteDataset(config.dataset, "test"),
                              FeatureExtractor(config.seed), RngStream(config.seed, "eval"), repetitions=2, clip_length=4)
        return (tmp_path / name / "model.dmmt").read_bytes(), report.write_csv(tmp_path / name / "metrics.csv").read_bytes()

    assert train_and_eval("a") == train_and_eval("b")
