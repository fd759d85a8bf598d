# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled warp kernels.

The arithmetic mirrors ``_kernels/reference.py`` expression by expression
(and the build disables FP contraction), so the two backends produce
bit-identical results. Any change here must be applied there as well.
"""

import numpy as np

from libc.math cimport floor

BACKEND_NAME = "native"

cdef double _EDGE = 1e-9


def warp_image_raw(const double[:, :, ::1] src, const double[:, ::1] depth,
                   double fx_r, double fy_r, double cx_r, double cy_r,
                   const double[:, ::1] rot, const double[::1] trans,
                   double fx_s, double fy_s, double cx_s, double cy_s,
                   bint want_jacobian):
    """Warp ``src`` into the reference view through a per-pixel depth map."""
    cdef Py_ssize_t hd = depth.shape[0]
    cdef Py_ssize_t wd = depth.shape[1]
    cdef Py_ssize_t hs = src.shape[0]
    cdef Py_ssize_t ws = src.shape[1]
    cdef Py_ssize_t nc = src.shape[2]

    warped_arr = np.empty((hd, wd, nc), dtype=np.float64)
    mask_arr = np.empty((hd, wd), dtype=np.uint8)
    dwdz_arr = np.empty((hd, wd, nc), dtype=np.float64) if want_jacobian \
        else np.empty((1, 1, 1), dtype=np.float64)

    cdef double[:, :, ::1] warped = warped_arr
    cdef unsigned char[:, ::1] mask = mask_arr
    cdef double[:, :, ::1] dwdz = dwdz_arr

    cdef double r00 = rot[0, 0], r01 = rot[0, 1], r02 = rot[0, 2]
    cdef double r10 = rot[1, 0], r11 = rot[1, 1], r12 = rot[1, 2]
    cdef double r20 = rot[2, 0], r21 = rot[2, 1], r22 = rot[2, 2]
    cdef double t0 = trans[0], t1 = trans[1], t2 = trans[2]

    cdef double xmax = (ws - 1) + _EDGE
    cdef double ymax = (hs - 1) + _EDGE
    cdef Py_ssize_t xcap = ws - 2 if ws >= 2 else 0
    cdef Py_ssize_t ycap = hs - 2 if hs >= 2 else 0

    cdef Py_ssize_t i, j, c, x0, y0, x1, y1
    cdef double xn, yn, rx, ry, rz, z, px, py, pz, spz, u, v, uc, vc, fu, fv
    cdef double g00, g10, g01, g11, w00, w10, w01, w11, m
    cdef double nu, nv, dudz, dvdz, ddu, ddv
    cdef bint ok

    with nogil:
        for i in range(hd):
            yn = (i - cy_r) / fy_r
            for j in range(wd):
                xn = (j - cx_r) / fx_r
                rx = r00 * xn + r01 * yn + r02
                ry = r10 * xn + r11 * yn + r12
                rz = r20 * xn + r21 * yn + r22
                z = depth[i, j]
                px = rx * z + t0
                py = ry * z + t1
                pz = rz * z + t2
                ok = (z > 0.0) and (pz > 0.0)
                spz = pz if ok else 1.0
                u = fx_s * (px / spz) + cx_s
                v = fy_s * (py / spz) + cy_s
                if ok:
                    ok = (u >= -_EDGE) and (u <= xmax) and \
                         (v >= -_EDGE) and (v <= ymax)
                mask[i, j] = 1 if ok else 0
                m = 1.0 if ok else 0.0

                uc = u
                if uc < 0.0:
                    uc = 0.0
                elif uc > ws - 1:
                    uc = ws - 1
                vc = v
                if vc < 0.0:
                    vc = 0.0
                elif vc > hs - 1:
                    vc = hs - 1
                x0 = <Py_ssize_t>floor(uc)
                if x0 < 0:
                    x0 = 0
                elif x0 > xcap:
                    x0 = xcap
                y0 = <Py_ssize_t>floor(vc)
                if y0 < 0:
                    y0 = 0
                elif y0 > ycap:
                    y0 = ycap
                x1 = x0 + 1
                if x1 > ws - 1:
                    x1 = ws - 1
                y1 = y0 + 1
                if y1 > hs - 1:
                    y1 = hs - 1
                fu = uc - x0
                fv = vc - y0

                w00 = (1.0 - fu) * (1.0 - fv)
                w10 = fu * (1.0 - fv)
                w01 = (1.0 - fu) * fv
                w11 = fu * fv

                if want_jacobian:
                    nu = rx * t2 - t0 * rz
                    nv = ry * t2 - t1 * rz
                    dudz = fx_s * (nu / (spz * spz))
                    dvdz = fy_s * (nv / (spz * spz))
                    for c in range(nc):
                        g00 = src[y0, x0, c]
                        g10 = src[y0, x1, c]
                        g01 = src[y1, x0, c]
                        g11 = src[y1, x1, c]
                        warped[i, j, c] = (w00 * g00 + w10 * g10 +
                                           w01 * g01 + w11 * g11) * m
                        ddu = (1.0 - fv) * (g10 - g00) + fv * (g11 - g01)
                        ddv = (1.0 - fu) * (g01 - g00) + fu * (g11 - g10)
                        dwdz[i, j, c] = (ddu * dudz + ddv * dvdz) * m
                else:
                    for c in range(nc):
                        g00 = src[y0, x0, c]
                        g10 = src[y0, x1, c]
                        g01 = src[y1, x0, c]
                        g11 = src[y1, x1, c]
                        warped[i, j, c] = (w00 * g00 + w10 * g10 +
                                           w01 * g01 + w11 * g11) * m

    return warped_arr, mask_arr, (dwdz_arr if want_jacobian else None)
