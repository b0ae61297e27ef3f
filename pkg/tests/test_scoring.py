import math

import numpy as np
import pytest

from ogdetect.geo import TileIndex
from ogdetect.scoring import (
    Cam,
    DimensionError,
    ScoringError,
    TileScore,
    bilinear_upsample,
    bright_fraction,
    cam_to_png_array,
    compute_cam,
    heuristic_score,
    score_batch,
    validate_tile_image,
)


def black_tile():
    return np.zeros((500, 500, 3), dtype=np.uint8)


def white_tile():
    return np.full((500, 500, 3), 255, dtype=np.uint8)


class TestTileImageValidation:
    def test_wrong_shape(self):
        with pytest.raises(DimensionError):
            validate_tile_image(np.zeros((499, 500, 3), dtype=np.uint8))

    def test_wrong_dtype(self):
        with pytest.raises(DimensionError):
            validate_tile_image(np.zeros((500, 500, 3), dtype=np.float32))


class TestHeuristicScore:
    def test_all_black(self):
        expected = 1.0 / (1.0 + math.exp(4.0))
        assert heuristic_score(black_tile()) == pytest.approx(expected, abs=1e-12)
        assert heuristic_score(black_tile()) == pytest.approx(0.018, abs=1e-3)

    def test_all_white(self):
        assert heuristic_score(white_tile()) == pytest.approx(1.0, abs=1e-12)

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        img = rng.integers(0, 256, size=(500, 500, 3), dtype=np.uint8)
        assert heuristic_score(img) == heuristic_score(img.copy())

    def test_bright_fraction_strictly_above_200(self):
        img = black_tile()
        img[:, :, :] = 200  # luminance exactly 200 is not bright
        assert bright_fraction(img) == 0.0
        img[0, 0, :] = 201
        assert bright_fraction(img) == pytest.approx(1.0 / 250_000)


class TestComputeCam:
    def test_constant_positive(self):
        cam = compute_cam(np.ones((1, 15, 15)), np.array([1.0]))
        assert np.array_equal(cam.raw, np.ones((15, 15)))
        assert np.array_equal(cam.upsampled, np.ones((500, 500)))

    def test_negative_sum_is_zero(self):
        cam = compute_cam(np.ones((1, 15, 15)), np.array([-1.0]))
        assert np.array_equal(cam.raw, np.zeros((15, 15)))
        assert np.array_equal(cam.upsampled, np.zeros((500, 500)))

    def test_elementwise_oracle(self):
        rng = np.random.default_rng(42)
        features = rng.normal(size=(4, 15, 15))
        weights = rng.normal(size=4)
        cam = compute_cam(features, weights)
        expected = np.zeros((15, 15))
        for y in range(15):
            for x in range(15):
                s = sum(weights[c] * features[c, y, x] for c in range(4))
                expected[y, x] = max(0.0, s)
        assert np.allclose(cam.raw, expected, atol=1e-6)
        assert (cam.raw >= 0.0).all()

    def test_channel_mismatch(self):
        with pytest.raises(DimensionError):
            compute_cam(np.ones((3, 15, 15)), np.ones(4))

    def test_wrong_spatial_dims(self):
        with pytest.raises(DimensionError):
            compute_cam(np.ones((2, 14, 15)), np.ones(2))

    def test_normalized_max_is_one(self):
        rng = np.random.default_rng(3)
        cam = compute_cam(np.abs(rng.normal(size=(2, 15, 15))), np.array([1.0, 0.5]))
        assert cam.upsampled.max() == 1.0
        assert cam.upsampled.min() >= 0.0

    def test_linear_in_weights_before_relu(self):
        rng = np.random.default_rng(11)
        features = np.abs(rng.normal(size=(3, 15, 15)))  # nonnegative sums
        w = np.abs(rng.normal(size=3))
        one = compute_cam(features, w)
        two = compute_cam(features, 2.0 * w)
        assert np.allclose(two.raw, 2.0 * one.raw, atol=1e-9)

    def test_quantized_png_array(self):
        cam = Cam(raw=np.ones((15, 15)), upsampled=np.full((500, 500), 0.5))
        arr = cam_to_png_array(cam)
        assert arr.dtype == np.uint8
        assert (arr == 128).all()  # round(0.5 * 255) = 128


class TestBilinearUpsample:
    def test_constant_is_exact(self):
        out = bilinear_upsample(np.full((15, 15), 3.7))
        assert (out == 3.7).all()

    def test_preserves_range(self):
        rng = np.random.default_rng(5)
        raw = rng.uniform(0.0, 2.0, size=(15, 15))
        out = bilinear_upsample(raw)
        assert out.min() >= raw.min() - 1e-12
        assert out.max() <= raw.max() + 1e-12

    def test_sample_convention(self):
        # output pixel centers map to (i + 0.5) * 15/500 - 0.5, clamped
        raw = np.arange(15, dtype=float)[:, None] * np.ones((1, 15))
        out = bilinear_upsample(raw)
        src0 = max(0.0, (0 + 0.5) * 15.0 / 500.0 - 0.5)
        assert out[0, 0] == pytest.approx(src0)
        src250 = (250 + 0.5) * 15.0 / 500.0 - 0.5
        assert out[250, 0] == pytest.approx(src250)


def _fail_scorer(img):
    raise RuntimeError("boom")


class TestScoreBatch:
    def test_empty(self):
        assert score_batch([], heuristic_score) == []

    def test_sorted_and_permutation_invariant(self):
        tiles = [
            (TileIndex(2, 1), black_tile()),
            (TileIndex(0, 0), white_tile()),
            (TileIndex(1, 0), black_tile()),
        ]
        a = score_batch(tiles, heuristic_score)
        b = score_batch(list(reversed(tiles)), heuristic_score)
        assert a == b
        assert [(s.tile.row, s.tile.col) for s in a] == [(0, 0), (0, 1), (1, 2)]

    def test_matches_sequential_oracle(self):
        rng = np.random.default_rng(9)
        tiles = [
            (TileIndex(c, r), rng.integers(0, 256, size=(500, 500, 3), dtype=np.uint8))
            for r in range(2)
            for c in range(3)
        ]
        batch = score_batch(tiles, heuristic_score)
        expected = sorted(
            (TileScore(t, heuristic_score(img)) for t, img in tiles),
            key=lambda s: (s.tile.row, s.tile.col),
        )
        assert batch == expected

    def test_worker_count_invariant(self):
        tiles = [
            (TileIndex(c, r), black_tile() if (c + r) % 2 else white_tile())
            for r in range(3)
            for c in range(3)
        ]
        serial = score_batch(tiles, heuristic_score, workers=1)
        parallel = score_batch(tiles, heuristic_score, workers=3)
        assert serial == parallel

    def test_failure_names_tile(self):
        tiles = [(TileIndex(4, 7), black_tile())]
        with pytest.raises(ScoringError, match=r"\(4, 7\)"):
            score_batch(tiles, _fail_scorer)
