"""Pure NumPy warp kernels.

This module is the semantic reference for the compiled backend: the native
kernels replicate the exact arithmetic (same operation order, no fused
multiply-adds) so both produce bit-identical results. Keep the expression
structure here in sync with ``_native.pyx``.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

# Tolerance for classifying a sample position as inside the source image;
# mirrors mvskit.camera.BOUNDARY_TOL.
_EDGE = 1e-9


def warp_image_raw(
    src: np.ndarray,
    depth: np.ndarray,
    fx_r: float,
    fy_r: float,
    cx_r: float,
    cy_r: float,
    rot: np.ndarray,
    trans: np.ndarray,
    fx_s: float,
    fy_s: float,
    cx_s: float,
    cy_s: float,
    want_jacobian: bool,
):
    """Warp ``src`` into the reference view through a per-pixel depth map.

    Returns ``(warped, mask, dwdz)``; ``dwdz`` is ``None`` unless
    ``want_jacobian`` is set, in which case it holds the derivative of each
    warped channel value with respect to that pixel's depth.
    """
    hd, wd = depth.shape
    hs, ws = src.shape[0], src.shape[1]
    r00, r01, r02 = rot[0, 0], rot[0, 1], rot[0, 2]
    r10, r11, r12 = rot[1, 0], rot[1, 1], rot[1, 2]
    r20, r21, r22 = rot[2, 0], rot[2, 1], rot[2, 2]
    t0, t1, t2 = trans[0], trans[1], trans[2]

    xs = np.arange(wd, dtype=np.float64)
    ys = np.arange(hd, dtype=np.float64)
    xn = ((xs - cx_r) / fx_r)[None, :]
    yn = ((ys - cy_r) / fy_r)[:, None]

    rx = r00 * xn + r01 * yn + r02
    ry = r10 * xn + r11 * yn + r12
    rz = r20 * xn + r21 * yn + r22

    z = depth
    px = rx * z + t0
    py = ry * z + t1
    pz = rz * z + t2

    geom = (z > 0.0) & (pz > 0.0)
    safe_pz = np.where(geom, pz, 1.0)
    u = fx_s * (px / safe_pz) + cx_s
    v = fy_s * (py / safe_pz) + cy_s

    inb = (u >= -_EDGE) & (u <= (ws - 1) + _EDGE)
    inb &= (v >= -_EDGE) & (v <= (hs - 1) + _EDGE)
    mask = geom & inb

    uc = np.clip(u, 0.0, float(ws - 1))
    vc = np.clip(v, 0.0, float(hs - 1))
    x0 = np.floor(uc).astype(np.int64)
    y0 = np.floor(vc).astype(np.int64)
    np.clip(x0, 0, max(ws - 2, 0), out=x0)
    np.clip(y0, 0, max(hs - 2, 0), out=y0)
    x1 = np.minimum(x0 + 1, ws - 1)
    y1 = np.minimum(y0 + 1, hs - 1)
    fu = uc - x0
    fv = vc - y0

    g00 = src[y0, x0]
    g10 = src[y0, x1]
    g01 = src[y1, x0]
    g11 = src[y1, x1]

    w00 = ((1.0 - fu) * (1.0 - fv))[:, :, None]
    w10 = (fu * (1.0 - fv))[:, :, None]
    w01 = ((1.0 - fu) * fv)[:, :, None]
    w11 = (fu * fv)[:, :, None]
    warped = w00 * g00 + w10 * g10 + w01 * g01 + w11 * g11
    warped *= mask[:, :, None]

    dwdz = None
    if want_jacobian:
        nu = rx * t2 - t0 * rz
        nv = ry * t2 - t1 * rz
        dudz = fx_s * (nu / (safe_pz * safe_pz))
        dvdz = fy_s * (nv / (safe_pz * safe_pz))
        ddu = (1.0 - fv)[:, :, None] * (g10 - g00) + fv[:, :, None] * (g11 - g01)
        ddv = (1.0 - fu)[:, :, None] * (g01 - g00) + fu[:, :, None] * (g11 - g10)
        dwdz = ddu * dudz[:, :, None] + ddv * dvdz[:, :, None]
        dwdz *= mask[:, :, None]

    return warped, mask.astype(np.uint8), dwdz
