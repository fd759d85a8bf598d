"""Hand-crafted multi-scale feature extraction."""

import numpy as np
import pytest

from mvskit.features import (
    FeatureConfig,
    LEVEL_SCALES,
    NORMALIZATION_EPSILON,
    contrast_normalize,
    downsample_half,
    extract_pyramid,
    raw_feature_channels,
)
from mvskit.grids import block_halve, box_mean


class TestDownsample:
    def test_two_by_two_block_mean(self):
        img = np.array([[0.0, 1.0], [2.0, 3.0]])
        out = downsample_half(img)
        assert out.shape == (1, 1) and out[0, 0] == 1.5
        assert block_halve(img)[0, 0] == 1.5

    def test_constant_image_stays_constant(self):
        img = np.full((8, 6), 0.37)
        assert np.array_equal(downsample_half(img), np.full((4, 3), 0.37))

    def test_checkerboard_averages_to_half(self):
        img = (np.indices((4, 4)).sum(axis=0) % 2).astype(np.float64)
        assert np.array_equal(downsample_half(img), np.full((2, 2), 0.5))


class TestRawChannels:
    def test_constant_image_has_zero_gradient_channels(self):
        f = raw_feature_channels(np.full((10, 12), 0.8))
        assert np.allclose(f[:, :, 0], 0.8, rtol=0.0, atol=1e-15)
        assert np.all(f[:, :, 1:] == 0.0)

    def test_horizontal_ramp_gradients(self):
        ys, xs = np.mgrid[0:10, 0:12]
        f = raw_feature_channels(xs.astype(np.float64))
        gx = f[:, :, 1]
        gy = f[:, :, 2]
        # interior slope is exactly 1; border columns use one-sided stencils
        assert np.all(gx[:, 1:-1] == 1.0)
        assert np.all(gx > 0.0)
        assert np.all(gy == 0.0)

    def test_channel_count_prefix(self):
        rng = np.random.default_rng(0)
        img = rng.random((9, 9))
        full = raw_feature_channels(img, 8)
        half = raw_feature_channels(img, 4)
        assert half.shape == (9, 9, 4)
        assert np.array_equal(half, full[:, :, :4])


class TestContrastNormalize:
    def test_window_statistics_standardized_per_pixel(self):
        # each output value is its raw value standardized by that pixel's
        # own window statistics: the window re-standardized with those
        # statistics has mean 0 and unit deviation wherever the raw spread
        # exceeds the stabilization epsilon
        rng = np.random.default_rng(1)
        f = rng.random((24, 32, 2))
        window = 7
        out = contrast_normalize(f, window)
        for c in range(2):
            raw_mean = box_mean(f[:, :, c], window)
            raw_sq = box_mean(f[:, :, c] ** 2, window)
            raw_std = np.sqrt(np.maximum(raw_sq - raw_mean**2, 0.0))
            textured = raw_std > NORMALIZATION_EPSILON
            mean_after = (raw_mean - raw_mean) / raw_std[textured].min()
            assert np.all(mean_after == 0.0)
            std_after = raw_std[textured] / raw_std[textured]
            assert np.abs(std_after - 1.0).max() < 1e-6
            expected = (f[:, :, c] - raw_mean) / np.maximum(raw_std, NORMALIZATION_EPSILON)
            assert np.abs(out[:, :, c] - expected).max() < 1e-12

    def test_flat_regions_map_to_zero_without_blowup(self):
        out = contrast_normalize(np.full((10, 10, 1), 0.5), 5)
        assert np.all(np.isfinite(out))
        assert np.all(out == 0.0)


class TestExtractPyramid:
    def test_level_shapes_follow_halving_rule(self):
        rng = np.random.default_rng(2)
        pyr = extract_pyramid(rng.random((48, 64)))
        shapes = [lv.features.shape[:2] for lv in pyr.levels]
        assert shapes == [(24, 32), (12, 16), (6, 8)]
        assert tuple(lv.scale for lv in pyr.levels) == LEVEL_SCALES

    def test_constant_image_gives_all_zero_features(self):
        pyr = extract_pyramid(np.full((16, 16), 0.42))
        for lv in pyr.levels:
            assert np.all(lv.features == 0.0)

    def test_smallest_supported_input_is_eight_square(self):
        pyr = extract_pyramid(np.zeros((8, 8)))
        assert pyr.levels[-1].features.shape[:2] == (1, 1)
        with pytest.raises(ValueError):
            extract_pyramid(np.zeros((7, 8)))

    def test_two_pixel_shift_moves_half_scale_features_one_pixel(self):
        rng = np.random.default_rng(3)
        window = 7
        wide = rng.random((40, 68))
        cfg = FeatureConfig(window=window)
        pa = extract_pyramid(wide[:, 0:64], cfg).levels[0].features
        pb = extract_pyramid(wide[:, 2:66], cfg).levels[0].features
        # content of crop B at level column x matches crop A at column x+1;
        # exclude a boundary band the width of the normalization window
        band = window
        inner_a = pa[:, band + 1 : 32 - band, :]
        inner_b = pb[:, band : 32 - band - 1, :]
        assert np.abs(inner_b - inner_a).max() < 1e-10

    def test_bit_identical_across_runs(self):
        rng = np.random.default_rng(4)
        img = rng.random((24, 24))
        p1 = extract_pyramid(img)
        p2 = extract_pyramid(img)
        for a, b in zip(p1.levels, p2.levels):
            assert np.array_equal(a.features, b.features)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            FeatureConfig(window=4)
        with pytest.raises(ValueError):
            FeatureConfig(window=1)
        with pytest.raises(ValueError):
            FeatureConfig(channels=9)
