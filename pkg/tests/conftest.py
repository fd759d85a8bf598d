"""Shared synthetic-scene builders used across the test suite."""

from __future__ import annotations

import math

import numpy as np
import pytest

from mvskit.camera import CameraIntrinsics
from mvskit.planesweep import DepthHypotheses
from mvskit.scene import (
    NoiseTexture,
    PlaneGeometry,
    SceneSpec,
    make_translation_rig,
    render_scene,
)


def recovery_hypotheses() -> DepthHypotheses:
    """The 32-step hypothesis range used by the plane-recovery scenes."""
    return DepthHypotheses(425.0, 935.0, 32)


def on_grid_plane_depth() -> float:
    """A plane depth that coincides exactly with one of the 32 hypotheses."""
    return float(recovery_hypotheses().values[11])


def integral_disparity_baseline(focal: float, depth: float, disparity: float = 8.0) -> float:
    """Baseline giving an exact integer disparity at full resolution.

    fx * b / Z = disparity, so after any number of 2x downsamplings the
    shift stays an exact multiple of the pixel pitch and bilinear
    resampling is lossless on the rendered views.
    """
    return disparity * depth / focal

def plane_scene(
    width: int = 64,
    height: int = 48,
    n_views: int = 2,
    focal: float = 96.0,
    texture_seed: int = 1,
    depth: float | None = None,
    baseline: float | None = None,
    octaves: int = 4,
    cell: float = 12.0,
):
    """Fronto-parallel textured plane rig with known exact depth.

    Returns ``(views, cams, hyp, depth)``. By default the plane depth sits
    exactly on hypothesis index 11 of the 32-step range and the baseline
    makes the stereo disparity exactly 8 pixels, so plane-sweep matching is
    noise-free apart from border effects.
    """
    hyp = recovery_hypotheses()
    if depth is None:
        depth = on_grid_plane_depth()
    if baseline is None:
        baseline = integral_disparity_baseline(focal, depth)
    intr = CameraIntrinsics(
        fx=focal, fy=focal, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        width=width, height=height,
    )
    cams = make_translation_rig(intr, n_views, baseline)
    spec = SceneSpec(
        geometry=PlaneGeometry((0.0, 0.0, 1.0), depth),
        texture=NoiseTexture(texture_seed, octaves, cell),
        cameras=cams,
        width=width,
        height=height,
    )
    views = render_scene(spec)
    return views, cams, hyp, depth


def flat_border_scene(
    width: int = 128, height: int = 96, margin: float = 40.0, texture_seed: int = 1
):
    """Plane scene whose texture is constant along u outside a central band.

    With an exact integer disparity (8 px at full resolution here), every
    border convention (replicate padding, clamped neighbor differences)
    then equals the true off-frame continuation of the texture, so losses
    evaluated at ground-truth depth vanish exactly instead of only up to
    border effects.
    """
    from mvskit.scene import FlatBorderTexture

    depth = 600.0
    focal = 96.0
    baseline = integral_disparity_baseline(focal, depth)  # 50mm
    intr = CameraIntrinsics(
        fx=focal, fy=focal, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        width=width, height=height,
    )
    cams = make_translation_rig(intr, 2, baseline)
    texture = FlatBorderTexture(
        NoiseTexture(texture_seed, 4, 12.0), margin, width - 1.0 - margin
    )
    spec = SceneSpec(
        geometry=PlaneGeometry((0.0, 0.0, 1.0), depth),
        texture=texture,
        cameras=cams,
        width=width,
        height=height,
    )
    return render_scene(spec), cams, depth


def interior_border(focal: float, baseline: float, d_min: float = 425.0) -> int:
    """Pixels on each side that can lack cross-view coverage.

    The largest possible disparity is fx*b/d_min; anything further from the
    border is observed by both cameras at every admissible depth.
    """
    return int(math.ceil(focal * baseline / d_min)) + 2


@pytest.fixture(scope="session")
def recovery_scene():
    """The 64x48 two-view plane scene shared by the slower tests."""
    return plane_scene()
