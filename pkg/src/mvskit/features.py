"""Hand-crafted multi-scale feature pyramids.

Features are simple local statistics (smoothed intensity, gradients,
oriented differences) computed on successively halved copies of the input
and locally contrast-normalized, giving every level a fixed channel count.
All channels are translation covariant away from the borders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import box_mean, to_luma

# Stabilization floor for the per-window standard deviation. Normalization
# divides by max(sigma, EPSILON), so windows with real contrast come out
# with exactly unit local spread while near-constant windows stay bounded.
NORMALIZATION_EPSILON = 1e-3

#: Number of raw channels the extractor can produce.
MAX_CHANNELS = 8

#: Scales of the levels produced by :func:`extract_pyramid`.
LEVEL_SCALES = (0.5, 0.25, 0.125)


@dataclass(frozen=True)
class FeatureConfig:
    """Feature extraction settings.

    ``channels`` selects a prefix of the built-in channel list (at most 8);
    ``window`` is the odd side length of the contrast-normalization window.
    """

    channels: int = 8
    window: int = 7

    def __post_init__(self) -> None:
        if not (1 <= self.channels <= MAX_CHANNELS):
            raise ValueError(f"channels must be in [1, {MAX_CHANNELS}]")
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be an odd integer >= 3")


@dataclass(frozen=True)
class PyramidLevel:
    scale: float
    features: np.ndarray  # (h, w, C)


@dataclass(frozen=True)
class FeaturePyramid:
    levels: tuple[PyramidLevel, ...]

    def __post_init__(self) -> None:
        counts = {lv.features.shape[2] for lv in self.levels}
        if len(counts) > 1:
            raise ValueError("all pyramid levels must share one channel count")


def downsample_half(img: np.ndarray) -> np.ndarray:
    """2x2 average-pool an image; output dimensions are floored halves."""
    a = np.asarray(img, dtype=np.float64)
    h2, w2 = a.shape[0] // 2, a.shape[1] // 2
    if h2 < 1 or w2 < 1:
        raise ValueError(f"image of shape {a.shape} is too small to halve")
    c = a[: 2 * h2, : 2 * w2]
    if c.ndim == 2:
        c = c.reshape(h2, 2, w2, 2)
        return (c[:, 0, :, 0] + c[:, 0, :, 1] + c[:, 1, :, 0] + c[:, 1, :, 1]) / 4.0
    c = c.reshape(h2, 2, w2, 2, -1)
    return (c[:, 0, :, 0] + c[:, 0, :, 1] + c[:, 1, :, 0] + c[:, 1, :, 1]) / 4.0


def _central_gradient(a: np.ndarray, axis: int) -> np.ndarray:
    """Central difference with one-sided borders (np.gradient semantics).

    Single-element axes have zero slope under replicate continuation.
    """
    if a.shape[axis] < 2:
        return np.zeros_like(a)
    return np.gradient(a, axis=axis)


def raw_feature_channels(luma: np.ndarray, channels: int = MAX_CHANNELS) -> np.ndarray:
    """Stack of un-normalized feature channels for one pyramid level.

    Channel order: 3x3 smoothed intensity, horizontal gradient, vertical
    gradient, gradient magnitude, then forward differences toward the E, S,
    SE and NE neighbors. Neighbor indices are clamped to the image, so the
    border convention matches the replicate padding used elsewhere.
    """
    f = np.asarray(luma, dtype=np.float64)
    h, w = f.shape
    gx = _central_gradient(f, axis=1)
    gy = _central_gradient(f, axis=0)
    mag = np.sqrt(gx * gx + gy * gy)
    ye = np.arange(h)
    yn = np.maximum(ye - 1, 0)
    ys = np.minimum(ye + 1, h - 1)
    xw = np.arange(w)
    xe = np.minimum(xw + 1, w - 1)
    de = f[np.ix_(ye, xe)] - f
    ds = f[np.ix_(ys, xw)] - f
    dse = f[np.ix_(ys, xe)] - f
    dne = f[np.ix_(yn, xe)] - f
    stack = np.stack([box_mean(f, 3), gx, gy, mag, de, ds, dse, dne], axis=2)
    return stack[:, :, :channels]


def contrast_normalize(features: np.ndarray, window: int) -> np.ndarray:
    """Normalize each channel by its local window mean and spread.

    Per pixel and channel: ``(x - mean) / max(sigma, eps)`` with the mean
    and standard deviation taken over a ``window`` x ``window``
    replicate-border neighborhood. Wherever the raw window spread exceeds
    the epsilon, re-standardizing the window with the center's statistics
    gives exactly zero mean and unit deviation.
    """
    f = np.asarray(features, dtype=np.float64)
    mu = box_mean(f, window)
    ex2 = box_mean(f * f, window)
    var = np.maximum(ex2 - mu * mu, 0.0)
    sigma = np.sqrt(var)
    return (f - mu) / np.maximum(sigma, NORMALIZATION_EPSILON)


def extract_pyramid(img: np.ndarray, cfg: FeatureConfig = FeatureConfig()) -> FeaturePyramid:
    """Build the three-level feature pyramid of an image.

    The input (single-channel, or RGB which is converted to luma) is halved
    three times by 2x2 average pooling; each halved copy yields a feature
    stack via :func:`raw_feature_channels` followed by local contrast
    normalization. Images smaller than 8x8 are rejected, since the deepest
    level would vanish.
    """
    luma = to_luma(img)
    if luma.shape[0] < 8 or luma.shape[1] < 8:
        raise ValueError(
            f"image of shape {luma.shape} is too small; need at least 8x8"
        )
    levels = []
    cur = luma
    for scale in LEVEL_SCALES:
        cur = downsample_half(cur)
        feats = contrast_normalize(raw_feature_channels(cur, cfg.channels), cfg.window)
        levels.append(PyramidLevel(scale=scale, features=feats))
    return FeaturePyramid(levels=tuple(levels))
