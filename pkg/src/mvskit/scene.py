"""Synthetic scenes with analytic ground-truth depth.

Scenes are a single surface (plane or sphere) observed by a rig of pinhole
cameras.  Depth is obtained per pixel by exact ray-surface intersection, so
rendered depth maps carry no discretization error.  Surface shading comes
from a 2-D texture evaluated at the point's projection into view 0, which
makes the rendered views photometrically consistent by construction: a world
point receives the same intensity in every camera that sees it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .camera import CameraModel, RigidTransform
from .grids import to_luma

# Pinned 64-bit linear congruential generator used for procedural textures.
# The constants are part of the file-format/reproducibility contract: two
# builds given the same seed must produce identical textures.
LCG_MULTIPLIER = np.uint64(6364136223846793005)
LCG_INCREMENT = np.uint64(1442695040888963407)

_PARALLEL_TOL = 1e-12


class SceneError(ValueError):
    """A scene description that cannot be rendered."""


def _zigzag(n: np.ndarray) -> np.ndarray:
    """Map signed lattice coordinates to unsigned ints (0,-1,1,-2 -> 0,1,2,3)."""
    n = n.astype(np.int64)
    return np.where(n >= 0, 2 * n, -2 * n - 1).astype(np.uint64)


def _lcg_mix(state: np.ndarray, value: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):  # uint64 wraparound is the point
        return (state ^ value) * LCG_MULTIPLIER + LCG_INCREMENT


def lattice_hash(ix: np.ndarray, iy: np.ndarray, seed: int, salt: int = 0) -> np.ndarray:
    """Deterministic hash of integer lattice coordinates to floats in [0, 1)."""
    seeded = (int(seed) * int(LCG_MULTIPLIER) + int(LCG_INCREMENT)) & 0xFFFFFFFFFFFFFFFF
    state = np.broadcast_to(np.uint64(seeded), np.broadcast_shapes(np.shape(ix), np.shape(iy)))
    state = _lcg_mix(state, _zigzag(np.asarray(ix)))
    state = _lcg_mix(state, _zigzag(np.asarray(iy)))
    state = _lcg_mix(state, np.uint64(salt))
    return (state >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _smoothstep(t: np.ndarray) -> np.ndarray:
    return t * t * (3.0 - 2.0 * t)


class CheckerTexture:
    """Axis-aligned {0, 1} checkerboard with a given cell period in pixels."""

    def __init__(self, period: float) -> None:
        if period <= 0.0:
            raise ValueError("checker period must be positive")
        self.period = float(period)

    def sample(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        iu = np.floor(np.asarray(u, dtype=np.float64) / self.period)
        iv = np.floor(np.asarray(v, dtype=np.float64) / self.period)
        return np.where((iu + iv) % 2.0 == 0.0, 1.0, 0.0)


class NoiseTexture:
    """Smooth multi-octave value noise from the pinned lattice hash.

    Each octave bilinearly interpolates lattice hashes with smoothstep
    weights, giving a C1-continuous band-limited signal; octave o doubles
    the frequency and halves the amplitude.  Output lies in [0, 1).
    """

    def __init__(self, seed: int, octaves: int = 3, cell: float = 8.0) -> None:
        if octaves < 1:
            raise ValueError("octaves must be >= 1")
        if cell <= 0.0:
            raise ValueError("cell size must be positive")
        self.seed = int(seed)
        self.octaves = int(octaves)
        self.cell = float(cell)

    def sample(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        total = np.zeros(np.broadcast_shapes(u.shape, v.shape))
        amplitude = 1.0
        amplitude_sum = 0.0
        for octave in range(self.octaves):
            freq = float(2**octave) / self.cell
            x = u * freq
            y = v * freq
            x0 = np.floor(x)
            y0 = np.floor(y)
            fx = _smoothstep(x - x0)
            fy = _smoothstep(y - y0)
            ix = x0.astype(np.int64)
            iy = y0.astype(np.int64)
            h00 = lattice_hash(ix, iy, self.seed, octave)
            h10 = lattice_hash(ix + 1, iy, self.seed, octave)
            h01 = lattice_hash(ix, iy + 1, self.seed, octave)
            h11 = lattice_hash(ix + 1, iy + 1, self.seed, octave)
            top = h00 * (1.0 - fx) + h10 * fx
            bottom = h01 * (1.0 - fx) + h11 * fx
            total += amplitude * (top * (1.0 - fy) + bottom * fy)
            amplitude_sum += amplitude
            amplitude *= 0.5
        return total / amplitude_sum


class FlatBorderTexture:
    """Any texture, made constant along u outside a central band.

    Clamping u to [u_min, u_max] before sampling makes the signal constant
    in the horizontal direction near the image borders.  For horizontal
    camera rigs this removes border effects entirely: replicate-padded
    windowed statistics then agree exactly between views, because the
    replicated values equal the true off-frame texture.
    """

    def __init__(self, inner, u_min: float, u_max: float) -> None:
        if not u_max > u_min:
            raise ValueError("texture margin leaves no textured band")
        self.inner = inner
        self.u_min = float(u_min)
        self.u_max = float(u_max)

    def sample(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        uc = np.clip(np.asarray(u, dtype=np.float64), self.u_min, self.u_max)
        return self.inner.sample(uc, v)


class ImageTexture:
    """Bilinear lookup into a fixed grayscale image, clamped at the borders."""

    def __init__(self, image: np.ndarray) -> None:
        img = np.asarray(image, dtype=np.float64)
        if img.ndim == 3:
            img = to_luma(img)
        if img.ndim != 2 or min(img.shape) < 2:
            raise ValueError("texture image must be at least 2x2")
        self.image = img

    def sample(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        h, w = self.image.shape
        uc = np.clip(np.asarray(u, dtype=np.float64), 0.0, w - 1.0)
        vc = np.clip(np.asarray(v, dtype=np.float64), 0.0, h - 1.0)
        x0 = np.clip(np.floor(uc), 0, w - 2).astype(np.int64)
        y0 = np.clip(np.floor(vc), 0, h - 2).astype(np.int64)
        fx = uc - x0
        fy = vc - y0
        g00 = self.image[y0, x0]
        g10 = self.image[y0, x0 + 1]
        g01 = self.image[y0 + 1, x0]
        g11 = self.image[y0 + 1, x0 + 1]
        top = g00 * (1.0 - fx) + g10 * fx
        bottom = g01 * (1.0 - fx) + g11 * fx
        return top * (1.0 - fy) + bottom * fy


class PlaneGeometry:
    """The plane of world points P with normal . P = offset."""

    def __init__(self, normal: Sequence[float], offset: float) -> None:
        n = np.asarray(normal, dtype=np.float64).reshape(3)
        if float(np.linalg.norm(n)) == 0.0:
            raise ValueError("plane normal must be non-zero")
        self.normal = n
        self.offset = float(offset)

    def intersect(self, cam: CameraModel, xn: np.ndarray, yn: np.ndarray):
        pose = cam.world_to_camera
        n_cam = pose.rotation @ self.normal
        c_cam = self.offset + float(n_cam @ pose.translation)
        den = n_cam[0] * xn + n_cam[1] * yn + n_cam[2]
        safe = np.where(np.abs(den) > _PARALLEL_TOL, den, 1.0)
        z = c_cam / safe
        valid = (np.abs(den) > _PARALLEL_TOL) & (z > 0.0)
        return np.where(valid, z, 0.0), valid


class SphereGeometry:
    """A sphere given by its world-frame center and radius."""

    def __init__(self, center: Sequence[float], radius: float) -> None:
        if radius <= 0.0:
            raise ValueError("sphere radius must be positive")
        self.center = np.asarray(center, dtype=np.float64).reshape(3)
        self.radius = float(radius)

    def intersect(self, cam: CameraModel, xn: np.ndarray, yn: np.ndarray):
        pose = cam.world_to_camera
        s = pose.rotation @ self.center + pose.translation
        # Ray X(Z) = Z * (xn, yn, 1): the parameter is the camera depth itself.
        a = xn * xn + yn * yn + 1.0
        b = -2.0 * (xn * s[0] + yn * s[1] + s[2])
        c0 = float(s @ s) - self.radius * self.radius
        disc = b * b - 4.0 * a * c0
        has_root = disc >= 0.0
        sq = np.sqrt(np.where(has_root, disc, 0.0))
        near = (-b - sq) / (2.0 * a)
        far = (-b + sq) / (2.0 * a)
        z = np.where(near > 0.0, near, far)
        valid = has_root & (z > 0.0)
        return np.where(valid, z, 0.0), valid


@dataclass(frozen=True)
class SceneSpec:
    """A renderable scene: one surface, one texture, a camera rig."""

    geometry: PlaneGeometry | SphereGeometry
    texture: CheckerTexture | NoiseTexture | ImageTexture
    cameras: tuple[CameraModel, ...]
    width: int
    height: int
    d_min: float = 425.0
    d_max: float = 935.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "cameras", tuple(self.cameras))
        if len(self.cameras) < 1:
            raise SceneError("a scene needs at least one camera")
        if self.width < 2 or self.height < 2:
            raise SceneError("image size must be at least 2x2")
        for i, cam in enumerate(self.cameras):
            intr = cam.intrinsics
            if intr.width != self.width or intr.height != self.height:
                raise SceneError(
                    f"camera {i} intrinsics are {intr.width}x{intr.height}, "
                    f"scene is {self.width}x{self.height}"
                )
        if not (0.0 < self.d_min < self.d_max):
            raise SceneError("need 0 < d_min < d_max")


class RenderedView(NamedTuple):
    image: np.ndarray
    depth: np.ndarray


def render_scene(spec: SceneSpec) -> list[RenderedView]:
    """Render every camera; exact depth per pixel, texture via view-0 projection.

    Raises SceneError when some camera sees no surface point inside the
    scene's depth range.
    """
    ref = spec.cameras[0]
    views: list[RenderedView] = []
    xs = np.arange(spec.width, dtype=np.float64)
    ys = np.arange(spec.height, dtype=np.float64)
    for index, cam in enumerate(spec.cameras):
        intr = cam.intrinsics
        xn = np.broadcast_to(((xs - intr.cx) / intr.fx)[None, :], (spec.height, spec.width))
        yn = np.broadcast_to(((ys - intr.cy) / intr.fy)[:, None], (spec.height, spec.width))
        depth, valid = spec.geometry.intersect(cam, xn, yn)
        in_range = valid & (depth >= spec.d_min) & (depth <= spec.d_max)
        if not in_range.any():
            raise SceneError(
                f"geometry is not visible within depth range "
                f"[{spec.d_min}, {spec.d_max}] from camera {index}"
            )
        pts_cam = np.stack([xn * depth, yn * depth, depth], axis=2)
        inv = cam.world_to_camera.inverse()
        pts_world = pts_cam @ inv.rotation.T + inv.translation
        pose0 = ref.world_to_camera
        pts_ref = pts_world @ pose0.rotation.T + pose0.translation
        z0 = pts_ref[:, :, 2]
        tex_ok = valid & (z0 > 0.0)
        safe_z0 = np.where(tex_ok, z0, 1.0)
        intr0 = ref.intrinsics
        u0 = intr0.fx * (pts_ref[:, :, 0] / safe_z0) + intr0.cx
        v0 = intr0.fy * (pts_ref[:, :, 1] / safe_z0) + intr0.cy
        values = spec.texture.sample(u0, v0)
        image = np.where(tex_ok, values, 0.0)
        views.append(RenderedView(image=image, depth=np.where(valid, depth, 0.0)))
    return views


def make_translation_rig(
    intrinsics, num_views: int, baseline: float
) -> tuple[CameraModel, ...]:
    """Cameras looking down +z, displaced along x by one baseline per view."""
    if num_views < 1:
        raise ValueError("num_views must be >= 1")
    cams = []
    eye = np.eye(3)
    for i in range(num_views):
        center = np.array([i * float(baseline), 0.0, 0.0])
        pose = RigidTransform(rotation=eye, translation=-center)
        cams.append(CameraModel(intrinsics=intrinsics, world_to_camera=pose))
    return tuple(cams)


def ground_truth_cloud(
    views: Sequence[RenderedView], cameras: Sequence[CameraModel], stride: int = 1
) -> np.ndarray:
    """World points backprojected from every valid ground-truth depth pixel."""
    pts = []
    for view, cam in zip(views, cameras):
        depth = view.depth[::stride, ::stride]
        h, w = view.depth.shape
        intr = cam.intrinsics
        xs = np.arange(0, w, stride, dtype=np.float64)
        ys = np.arange(0, h, stride, dtype=np.float64)
        xn = (xs[None, :] - intr.cx) / intr.fx
        yn = (ys[:, None] - intr.cy) / intr.fy
        mask = depth > 0.0
        pc = np.stack(
            [
                (xn * depth)[mask],
                (np.broadcast_to(yn, depth.shape) * depth)[mask],
                depth[mask],
            ],
            axis=1,
        )
        inv = cam.world_to_camera.inverse()
        pts.append(pc @ inv.rotation.T + inv.translation)
    if not pts:
        return np.zeros((0, 3))
    return np.concatenate(pts, axis=0)


def perturb_image(image: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Additive Gaussian intensity noise, clipped back to [0, 1]."""
    if sigma < 0.0:
        raise ValueError("sigma must be non-negative")
    base = np.asarray(image, dtype=np.float64)
    if sigma == 0.0:
        return base.copy()
    return np.clip(base + rng.normal(0.0, sigma, size=base.shape), 0.0, 1.0)
