"""Pinhole camera models and point-level projection routines.

All poses are rigid world-to-camera transforms. Pixel coordinates follow
the pixel-center convention: integer coordinates address pixel centers and
the valid continuous domain of a ``W x H`` image is ``[0, W-1] x [0, H-1]``.
Depth is the z coordinate in the camera frame, measured in scene units
(millimeters throughout the synthetic pipeline); a depth of 0 encodes an
invalid pixel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Tolerance used when classifying a continuous sample position as inside the
# image domain. It absorbs round-off from the projection arithmetic so that
# an exact identity warp keeps border pixels valid.
BOUNDARY_TOL = 1e-9

_ORTHO_TOL = 1e-9


class BehindCameraError(ValueError):
    """Raised when a point to be projected has non-positive camera depth."""


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics plus the pixel dimensions they refer to."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise ValueError("focal lengths must be positive")
        if not (0.0 <= self.cx < self.width):
            raise ValueError(f"cx={self.cx} outside [0, {self.width})")
        if not (0.0 <= self.cy < self.height):
            raise ValueError(f"cy={self.cy} outside [0, {self.height})")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")

    def matrix(self) -> np.ndarray:
        """3x3 calibration matrix."""
        return np.array(
            [
                [self.fx, 0.0, self.cx],
                [0.0, self.fy, self.cy],
                [0.0, 0.0, 1.0],
            ]
        )


@dataclass(frozen=True)
class RigidTransform:
    """Rotation plus translation, applied as ``R @ p + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        r = np.array(self.rotation, dtype=np.float64)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if np.max(np.abs(r.T @ r - np.eye(3))) > _ORTHO_TOL:
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation determinant must be +1 within 1e-9")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one (3,) point or an (..., 3) stack of points."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform equal to applying ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )


@dataclass(frozen=True)
class CameraModel:
    """Intrinsics together with the world-to-camera pose of one view."""

    intrinsics: CameraIntrinsics
    world_to_camera: RigidTransform

    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        pose = self.world_to_camera
        return -(pose.rotation.T @ pose.translation)

    def to_world(self, points_cam: np.ndarray) -> np.ndarray:
        return self.world_to_camera.inverse().apply(points_cam)

    def to_camera(self, points_world: np.ndarray) -> np.ndarray:
        return self.world_to_camera.apply(points_world)


class TransferResult(NamedTuple):
    """Outcome of mapping a reference pixel into a source view."""

    x: float
    y: float
    depth: float
    valid: bool


def backproject(
    pixel: tuple[float, float], depth: float, intr: CameraIntrinsics
) -> np.ndarray:
    """Lift a pixel at a given depth to a camera-frame 3D point.

    Raises ValueError for non-positive depth (0 encodes "invalid" and has
    no 3D interpretation).
    """
    if not depth > 0.0:
        raise ValueError(f"depth must be positive, got {depth}")
    x, y = pixel
    return np.array(
        [
            (x - intr.cx) * depth / intr.fx,
            (y - intr.cy) * depth / intr.fy,
            depth,
        ]
    )


def project(
    point: np.ndarray, intr: CameraIntrinsics
) -> tuple[tuple[float, float], float]:
    """Project a camera-frame point to pixel coordinates.

    Returns ``((x, y), depth)``. Points at or behind the camera plane raise
    :class:`BehindCameraError`; grid-level callers convert that condition to
    a mask bit instead.
    """
    px, py, pz = float(point[0]), float(point[1]), float(point[2])
    if not pz > 0.0:
        raise BehindCameraError(f"point has non-positive depth {pz}")
    return (intr.fx * (px / pz) + intr.cx, intr.fy * (py / pz) + intr.cy), pz


def transfer_pixel(
    pixel: tuple[float, float],
    depth: float,
    ref_intr: CameraIntrinsics,
    src_intr: CameraIntrinsics,
    ref_to_src: RigidTransform,
) -> TransferResult:
    """Map a reference pixel with known depth into a source view.

    The returned depth is the point's z coordinate in the source camera
    frame, which downstream consistency checks compare against the source
    depth map. A point behind the source camera is flagged invalid rather
    than raised, since per-pixel callers treat it as a mask bit.
    """
    point = ref_to_src.apply(backproject(pixel, depth, ref_intr))
    try:
        (x, y), z = project(point, src_intr)
    except BehindCameraError:
        return TransferResult(0.0, 0.0, 0.0, False)
    return TransferResult(x, y, z, True)


def relative_transform(ref: CameraModel, src: CameraModel) -> RigidTransform:
    """Rigid transform taking reference-camera coordinates to source-camera ones."""
    return src.world_to_camera.compose(ref.world_to_camera.inverse())


def halve_intrinsics(intr: CameraIntrinsics) -> CameraIntrinsics:
    """Intrinsics matching one 2x2 block-mean downsampling step.

    A downsampled pixel center (i, j) sits at original coordinates
    (2i + 0.5, 2j + 0.5), so focal lengths halve and principal points map
    through ``c' = (c - 0.5) / 2``.
    """
    return CameraIntrinsics(
        fx=intr.fx / 2.0,
        fy=intr.fy / 2.0,
        cx=(intr.cx - 0.5) / 2.0,
        cy=(intr.cy - 0.5) / 2.0,
        width=intr.width // 2,
        height=intr.height // 2,
    )


def intrinsics_for_level(intr: CameraIntrinsics, halvings: int) -> CameraIntrinsics:
    """Apply :func:`halve_intrinsics` ``halvings`` times."""
    out = intr
    for _ in range(halvings):
        out = halve_intrinsics(out)
    return out
