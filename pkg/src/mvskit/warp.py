"""Image warping through depth: bilinear sampling and cross-view resampling."""

from __future__ import annotations

import numpy as np

from . import _kernels
from .camera import BOUNDARY_TOL, CameraIntrinsics, CameraModel, RigidTransform, relative_transform
from .grids import ensure_channels


def bilinear_sample(
    img: np.ndarray, pos: tuple[float, float]
) -> tuple[np.ndarray, bool]:
    """Sample an image at a continuous position with bilinear weights.

    Returns ``(values, valid)`` where ``values`` has one entry per channel.
    Positions outside ``[0, W-1] x [0, H-1]`` (beyond a tiny round-off
    tolerance) yield zeros with ``valid`` False; the boundary itself is
    inside.
    """
    a = ensure_channels(img)
    h, w, c = a.shape
    x, y = float(pos[0]), float(pos[1])
    if not (np.isfinite(x) and np.isfinite(y)):
        return np.zeros(c), False
    if x < -BOUNDARY_TOL or x > (w - 1) + BOUNDARY_TOL:
        return np.zeros(c), False
    if y < -BOUNDARY_TOL or y > (h - 1) + BOUNDARY_TOL:
        return np.zeros(c), False
    xc = min(max(x, 0.0), float(w - 1))
    yc = min(max(y, 0.0), float(h - 1))
    x0 = min(max(int(np.floor(xc)), 0), max(w - 2, 0))
    y0 = min(max(int(np.floor(yc)), 0), max(h - 2, 0))
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fu = xc - x0
    fv = yc - y0
    w00 = (1.0 - fu) * (1.0 - fv)
    w10 = fu * (1.0 - fv)
    w01 = (1.0 - fu) * fv
    w11 = fu * fv
    values = w00 * a[y0, x0] + w10 * a[y0, x1] + w01 * a[y1, x0] + w11 * a[y1, x1]
    return values, True


def bilinear_gradient(img: np.ndarray, pos: tuple[float, float]) -> np.ndarray:
    """Spatial derivative (d/dx, d/dy) of :func:`bilinear_sample` per channel.

    Piecewise constant within each pixel cell; on cell boundaries the cell
    to the lower-right is used, matching the sampler's floor convention.
    """
    a = ensure_channels(img)
    h, w, c = a.shape
    x, y = float(pos[0]), float(pos[1])
    xc = min(max(x, 0.0), float(w - 1))
    yc = min(max(y, 0.0), float(h - 1))
    x0 = min(max(int(np.floor(xc)), 0), max(w - 2, 0))
    y0 = min(max(int(np.floor(yc)), 0), max(h - 2, 0))
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fu = xc - x0
    fv = yc - y0
    ddx = (1.0 - fv) * (a[y0, x1] - a[y0, x0]) + fv * (a[y1, x1] - a[y1, x0])
    ddy = (1.0 - fu) * (a[y1, x0] - a[y0, x0]) + fu * (a[y1, x1] - a[y0, x1])
    return np.stack([ddx, ddy], axis=0)


def _as_kernel_inputs(src: np.ndarray, depth: np.ndarray):
    s = np.ascontiguousarray(ensure_channels(src), dtype=np.float64)
    d = np.ascontiguousarray(np.asarray(depth, dtype=np.float64))
    if d.ndim != 2:
        raise ValueError("depth map must be a 2-d array")
    return s, d


def warp_image(
    src: np.ndarray,
    depth: np.ndarray,
    ref_intr: CameraIntrinsics,
    src_intr: CameraIntrinsics,
    ref_to_src: RigidTransform,
) -> tuple[np.ndarray, np.ndarray]:
    """Resample a source image into the reference view through ``depth``.

    Every reference pixel with valid depth is lifted to 3D, mapped into the
    source camera and sampled bilinearly. Returns ``(warped, mask)`` where
    ``mask`` is True exactly where the depth was valid, the transferred
    point lay in front of the source camera and the sample position fell
    inside the source image; warped values are 0 elsewhere.
    """
    s, d = _as_kernel_inputs(src, depth)
    rot = np.ascontiguousarray(ref_to_src.rotation, dtype=np.float64)
    tr = np.ascontiguousarray(ref_to_src.translation, dtype=np.float64)
    warped, mask, _ = _kernels.warp_image_raw(
        s, d,
        ref_intr.fx, ref_intr.fy, ref_intr.cx, ref_intr.cy,
        rot, tr,
        src_intr.fx, src_intr.fy, src_intr.cx, src_intr.cy,
        False,
    )
    if np.asarray(src).ndim == 2:
        warped = warped[:, :, 0]
    return warped, mask.astype(bool)


def warp_with_jacobian(
    src: np.ndarray,
    depth: np.ndarray,
    ref_intr: CameraIntrinsics,
    src_intr: CameraIntrinsics,
    ref_to_src: RigidTransform,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Like :func:`warp_image` but also yields d(warped)/d(depth) per pixel.

    The derivative chains the projection's sensitivity to depth with the
    bilinear interpolation stencil of the landing cell; it is zero wherever
    the mask is False.
    """
    s, d = _as_kernel_inputs(src, depth)
    rot = np.ascontiguousarray(ref_to_src.rotation, dtype=np.float64)
    tr = np.ascontiguousarray(ref_to_src.translation, dtype=np.float64)
    warped, mask, dwdz = _kernels.warp_image_raw(
        s, d,
        ref_intr.fx, ref_intr.fy, ref_intr.cx, ref_intr.cy,
        rot, tr,
        src_intr.fx, src_intr.fy, src_intr.cx, src_intr.cy,
        True,
    )
    if np.asarray(src).ndim == 2:
        warped = warped[:, :, 0]
        dwdz = dwdz[:, :, 0]
    return warped, mask.astype(bool), dwdz


def warp_between(
    src: np.ndarray, depth: np.ndarray, ref_cam: CameraModel, src_cam: CameraModel
) -> tuple[np.ndarray, np.ndarray]:
    """Convenience wrapper deriving the relative pose from two camera models."""
    return warp_image(
        src, depth, ref_cam.intrinsics, src_cam.intrinsics,
        relative_transform(ref_cam, src_cam),
    )


def transfer_grid(
    depth: np.ndarray,
    ref_intr: CameraIntrinsics,
    src_intr: CameraIntrinsics,
    ref_to_src: RigidTransform,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Continuous source-view positions for every reference pixel.

    Returns ``(u, v, z, valid)``: sample coordinates, source-frame depth and
    a validity mask covering depth > 0, the point being in front of the
    source camera and the landing position lying inside the source image.
    Used for consistency checks and for detecting interpolation-cell
    crossings; values where ``valid`` is False are unspecified.
    """
    d = np.asarray(depth, dtype=np.float64)
    h, w = d.shape
    rot = ref_to_src.rotation
    tr = ref_to_src.translation
    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)
    xn = ((xs - ref_intr.cx) / ref_intr.fx)[None, :]
    yn = ((ys - ref_intr.cy) / ref_intr.fy)[:, None]
    rx = rot[0, 0] * xn + rot[0, 1] * yn + rot[0, 2]
    ry = rot[1, 0] * xn + rot[1, 1] * yn + rot[1, 2]
    rz = rot[2, 0] * xn + rot[2, 1] * yn + rot[2, 2]
    px = rx * d + tr[0]
    py = ry * d + tr[1]
    pz = rz * d + tr[2]
    geom = (d > 0.0) & (pz > 0.0)
    spz = np.where(geom, pz, 1.0)
    u = src_intr.fx * (px / spz) + src_intr.cx
    v = src_intr.fy * (py / spz) + src_intr.cy
    inb = (u >= -BOUNDARY_TOL) & (u <= (src_intr.width - 1) + BOUNDARY_TOL)
    inb &= (v >= -BOUNDARY_TOL) & (v <= (src_intr.height - 1) + BOUNDARY_TOL)
    return u, v, pz, geom & inb
