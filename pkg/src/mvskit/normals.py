"""Surface normals from depth and normal-guided depth refinement.

Normals are estimated per pixel by averaging cross products over the
8-neighborhood; refinement replaces each depth with an edge-weighted
average of the depths proposed by its neighbors' local tangent planes.
Invalid normals are encoded as zero vectors, mirroring the depth-map
convention of 0 for invalid.
"""

from __future__ import annotations

import numpy as np

from .camera import CameraIntrinsics
from .grids import valid_mask

#: Neighbor offsets (dx, dy), ordered so consecutive entries are adjacent
#: directions; cross products are taken over consecutive pairs (cyclically).
NEIGHBOR_OFFSETS = (
    (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1),
)

#: Proposals whose tangent-plane denominator falls below this are discarded.
DEGENERATE_DENOMINATOR = 1e-8


def _shifted(a: np.ndarray, dx: int, dy: int, fill: float = 0.0) -> np.ndarray:
    """Array whose entry at (y, x) is ``a[y + dy, x + dx]``; out of range -> fill."""
    out = np.full_like(a, fill)
    h, w = a.shape[:2]
    ys_src = slice(max(dy, 0), h + min(dy, 0))
    xs_src = slice(max(dx, 0), w + min(dx, 0))
    ys_dst = slice(max(-dy, 0), h + min(-dy, 0))
    xs_dst = slice(max(-dx, 0), w + min(-dx, 0))
    out[ys_dst, xs_dst] = a[ys_src, xs_src]
    return out


def _camera_points(depth: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    h, w = depth.shape
    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)
    xn = ((xs - intr.cx) / intr.fx)[None, :]
    yn = ((ys - intr.cy) / intr.fy)[:, None]
    return np.stack([xn * depth, yn * depth, depth], axis=2)


def normal_from_depth(depth: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Unit surface normals of a depth map, oriented toward the camera.

    Per pixel, the eight vectors to the backprojected neighbors are paired
    cyclically and their cross products averaged; the mean is flipped to
    negative z (facing the camera) and normalized. Pixels whose own depth or
    any neighbor depth is invalid, border pixels, and pixels with a
    degenerate cross-product mean get the zero vector.
    """
    d = np.asarray(depth, dtype=np.float64)
    h, w = d.shape
    pts = _camera_points(d, intr)
    valid = valid_mask(d)

    all_valid = valid.copy()
    edges = []
    for dx, dy in NEIGHBOR_OFFSETS:
        n_pts = np.stack(
            [_shifted(pts[:, :, c], dx, dy) for c in range(3)], axis=2
        )
        n_valid = _shifted(valid.astype(np.float64), dx, dy) > 0.5
        # off-image neighbors count as invalid
        inb = np.ones((h, w), dtype=bool)
        if dx > 0:
            inb[:, w - dx:] = False
        elif dx < 0:
            inb[:, : -dx] = False
        if dy > 0:
            inb[h - dy:, :] = False
        elif dy < 0:
            inb[: -dy, :] = False
        n_valid &= inb
        all_valid &= n_valid
        edges.append(n_pts - pts)

    acc = np.zeros((h, w, 3))
    for k in range(len(edges)):
        a = edges[k]
        b = edges[(k + 1) % len(edges)]
        acc[:, :, 0] += a[:, :, 1] * b[:, :, 2] - a[:, :, 2] * b[:, :, 1]
        acc[:, :, 1] += a[:, :, 2] * b[:, :, 0] - a[:, :, 0] * b[:, :, 2]
        acc[:, :, 2] += a[:, :, 0] * b[:, :, 1] - a[:, :, 1] * b[:, :, 0]
    acc /= float(len(edges))

    flip = acc[:, :, 2] > 0.0
    acc[flip] *= -1.0

    norm = np.sqrt(np.sum(acc * acc, axis=2))
    ok = all_valid & (norm > 1e-12)
    out = np.zeros_like(acc)
    np.divide(acc, norm[:, :, None], out=out, where=ok[:, :, None])
    out[~ok] = 0.0
    return out


def normal_validity(normals: np.ndarray) -> np.ndarray:
    """Boolean mask of pixels carrying a (unit) normal."""
    return np.sum(np.asarray(normals) ** 2, axis=2) > 0.25


def edge_weights(image: np.ndarray, alpha1: float = 0.1) -> np.ndarray:
    """Directional intensity-edge weights, shape (8, H, W).

    Entry k at pixel p is ``exp(-alpha1 * |I(p + offset_k) - I(p)|)``; the
    difference is taken as 0 where the neighbor leaves the image (such
    directions never carry proposals anyway). Flat regions weight every
    direction equally at 1.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("edge weights expect a single-channel image")
    out = np.empty((len(NEIGHBOR_OFFSETS),) + img.shape)
    for k, (dx, dy) in enumerate(NEIGHBOR_OFFSETS):
        diff = _shifted(img, dx, dy) - img
        # zero the wrapped-in border so off-image neighbors behave as equal
        h, w = img.shape
        if dx > 0:
            diff[:, w - dx:] = 0.0
        elif dx < 0:
            diff[:, : -dx] = 0.0
        if dy > 0:
            diff[h - dy:, :] = 0.0
        elif dy < 0:
            diff[: -dy, :] = 0.0
        out[k] = np.exp(-alpha1 * np.abs(diff))
    return out


def depth_from_normal(
    depth: np.ndarray,
    normals: np.ndarray,
    intr: CameraIntrinsics,
    image: np.ndarray,
    alpha1: float = 0.1,
    d_min: float = 425.0,
    d_max: float = 935.0,
) -> np.ndarray:
    """One pass of normal-guided depth regularization.

    Each neighbor with a valid depth and normal proposes the depth at which
    the center pixel's ray meets the neighbor's tangent plane:
    ``Z_prop = Z_n * (N_n . r_n) / (N_n . r_c)`` with ``r`` the unit-z rays
    of the two pixels. Proposals with near-zero denominator or outside
    ``[d_min, d_max]`` are discarded; the survivors are averaged with the
    intensity edge weights of their directions (normalized over survivors).
    Pixels with no surviving proposal keep their input depth.
    """
    d = np.asarray(depth, dtype=np.float64)
    n = np.asarray(normals, dtype=np.float64)
    h, w = d.shape
    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)
    xn = np.broadcast_to(((xs - intr.cx) / intr.fx)[None, :], (h, w))
    yn = np.broadcast_to(((ys - intr.cy) / intr.fy)[:, None], (h, w))

    weights = edge_weights(image, alpha1)
    nvalid = normal_validity(n)
    dvalid = valid_mask(d)

    prop_sum = np.zeros((h, w))
    weight_sum = np.zeros((h, w))
    for k, (dx, dy) in enumerate(NEIGHBOR_OFFSETS):
        zn = _shifted(d, dx, dy)
        okn = _shifted((dvalid & nvalid).astype(np.float64), dx, dy) > 0.5
        nnx = _shifted(n[:, :, 0], dx, dy)
        nny = _shifted(n[:, :, 1], dx, dy)
        nnz = _shifted(n[:, :, 2], dx, dy)
        rnx = _shifted(xn.copy(), dx, dy)
        rny = _shifted(yn.copy(), dx, dy)
        num = nnx * rnx + nny * rny + nnz
        den = nnx * xn + nny * yn + nnz
        ok = okn & (np.abs(den) >= DEGENERATE_DENOMINATOR)
        safe_den = np.where(ok, den, 1.0)
        prop = zn * (num / safe_den)
        ok &= (prop >= d_min) & (prop <= d_max)
        wk = weights[k] * ok
        prop_sum += wk * np.where(ok, prop, 0.0)
        weight_sum += wk

    refined = d.copy()
    np.divide(prop_sum, weight_sum, out=refined, where=weight_sum > 0.0)
    refined[~dvalid] = 0.0
    return refined


def refine_depth_nd(
    depth: np.ndarray,
    intr: CameraIntrinsics,
    image: np.ndarray,
    alpha1: float = 0.1,
    iterations: int = 1,
    d_min: float = 425.0,
    d_max: float = 935.0,
) -> np.ndarray:
    """Alternate normal estimation and normal-guided smoothing.

    Plane-like depth maps are fixed points: the normals of a plane are exact
    and every surviving proposal reproduces the plane depth.
    """
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    out = np.asarray(depth, dtype=np.float64).copy()
    for _ in range(iterations):
        nrm = normal_from_depth(out, intr)
        out = depth_from_normal(out, nrm, intr, image, alpha1, d_min, d_max)
    return out
