#!/usr/bin/env python
# -*- coding: utf-8 -*-

import math

import numpy as np
import pytest

from motionmod.autograd.random import RngStream
from motionmod.core.errors import ContractError
from motionmod.data.dataset import SpriteDataset
from motionmod.metrics import (
    ConstantModel,
    CopySourceModel,
    GeneratorModel,
    OracleModel,
    evaluate_run,
    frechet_feature_distance,
    l1,
    psnr,
    ssim,
)
from motionmod.metrics.evaluate import AGG_HEADER, FRAME_HEADER, format_value
from motionmod.models.features import FeatureExtractor


class _Frozen:
    def parameters(self):
        return []


@pytest.fixture(scope="module")
def extractor():
    return FeatureExtractor(0)


def evaluate(model, dataset_dir, extractor, seed=5):
    return evaluate_run(
        model, SpriteDataset(dataset_dir, "test"), extractor, RngStream(seed, "ffd"),
        repetitions=2, clips_per_sequence=2, clip_length=2,
    )


class TestImageMetrics:
    def test_ssim_identical_is_one(self):
        image = RngStream(0).uniform(0.0, 1.0, (3, 16, 16))
        assert ssim(image, image) == pytest.approx(1.0)

    def test_ssim_inverted_binary_is_low(self):
        image = (RngStream(1).random((16, 16)) > 0.5).astype(np.float64)
        assert ssim(image, 1.0 - image) < 0.1

    def test_ssim_small_brightness_shift_is_high(self):
        image = RngStream(2).uniform(0.0, 0.9, (16, 16))
        assert ssim(image, image + 0.1) > 0.9

    def test_ssim_identical_after_affine_map(self):
        image = RngStream(8).uniform(0.0, 1.0, (3, 16, 16))
        mapped = 0.5 * image + 0.2
        assert ssim(mapped, mapped) == pytest.approx(1.0)

    def test_ssim_rejects_tiny_images(self):
        with pytest.raises(ContractError):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))

    def test_psnr_known_value(self):
        target = np.zeros((3, 4, 4))
        assert psnr(target + 0.1, target) == pytest.approx(20.0, abs=1e-9)

    def test_psnr_identical_is_infinite(self):
        image = np.full((3, 4, 4), 0.3)
        assert psnr(image, image) == math.inf
        assert format_value(psnr(image, image)) == "inf"

    def test_l1_shape_mismatch(self):
        with pytest.raises(ContractError):
            l1(np.zeros((3, 4, 4)), np.zeros((3, 4, 5)))


class TestFrechet:
    def test_identical_sets(self):
        features = RngStream(3).normal((200, 4))
        result = frechet_feature_distance(features, features)
        assert result.value < 1e-6
        assert not result.degenerate

    def test_shifted_gaussians(self):
        rng = RngStream(4, "ffd")
        a = rng.child("a").normal((10000, 1))
        b = rng.child("b").normal((10000, 1)) + 1.0
        assert frechet_feature_distance(a, b).value == pytest.approx(1.0, rel=0.05)

    def test_symmetric(self):
        rng = RngStream(9, "ffd")
        a = rng.child("a").normal((300, 3))
        b = rng.child("b").normal((300, 3)) * 2.0 + 0.5
        forward, reverse = frechet_feature_distance(a, b).value, frechet_feature_distance(b, a).value
        assert forward == pytest.approx(reverse, abs=1e-6)

    def test_few_samples_flagged_degenerate(self):
        rng = RngStream(5, "ffd")
        result = frechet_feature_distance(rng.child("a").normal((3, 8)), rng.child("b").normal((3, 8)))
        assert result.degenerate
        assert math.isfinite(result.value)

    def test_single_sample_rejected(self):
        with pytest.raises(ContractError):
            frechet_feature_distance(np.zeros((1, 2)), np.zeros((5, 2)))


class TestEvaluateRun:
    def test_oracle_is_perfect(self, dataset_dir, extractor):
        report = evaluate(OracleModel(), dataset_dir, extractor)
        summary = report.summary()
        assert summary["l1"] == 0.0
        assert summary["ssim"] == pytest.approx(1.0)
        assert summary["psnr"] == math.inf
        assert summary["ffd"] < 1e-6
        assert report.counts["all"] == 8
        assert report.counts["dropped"] + report.counts["clean"] == 8

    def test_baselines_are_worse_than_oracle(self, dataset_dir, extractor):
        constant = evaluate(ConstantModel(), dataset_dir, extractor).summary()
        copy = evaluate(CopySourceModel(), dataset_dir, extractor).summary()
        assert constant["l1"] > 0.0
        assert copy["psnr"] < math.inf
        assert constant["ssim"] < 1.0

    def test_constant_gray_l1_is_mean_distance_to_half(self, dataset_dir, extractor):
        test = SpriteDataset(dataset_dir, "test")
        frames = np.stack([test.load(i).frames for i in range(len(test))]).astype(np.float64)
        summary = evaluate(ConstantModel(), dataset_dir, extractor).summary()
        assert summary["l1"] == pytest.approx(float(np.abs(frames - 0.5).mean()), abs=1e-12)

    def test_csv_layout(self, dataset_dir, extractor):
        lines = evaluate(ConstantModel(), dataset_dir, extractor).to_csv().splitlines()
        body = [line for line in lines if not line.startswith("#")]
        assert lines[0].startswith("# ffd")
        assert body[0] == ",".join(FRAME_HEADER)
        assert body[9] == ",".join(AGG_HEADER)
        assert [row.split(",")[0] for row in body[10:]] == ["all", "dropped", "clean"]
        assert body[11].split(",")[4] == "nan"

    def test_same_seed_same_report(self, dataset_dir, extractor, tmp_path):
        first = evaluate(CopySourceModel(), dataset_dir, extractor).write_csv(tmp_path / "a.csv")
        second = evaluate(CopySourceModel(), dataset_dir, extractor).write_csv(tmp_path / "b.csv")
        assert first.read_bytes() == second.read_bytes()


class TestGeneratorModel:
    def test_windows_tile_sequence(self):
        assert GeneratorModel(_Frozen(), 2).window_starts(4) == [0, 2]

    def test_last_window_overlaps(self):
        assert GeneratorModel(_Frozen(), 4).window_starts(6) == [0, 2]

    def test_sequence_shorter_than_window(self):
        with pytest.raises(ContractError):
            GeneratorModel(_Frozen(), 4).window_starts(2)
