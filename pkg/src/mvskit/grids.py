"""Shared array conventions and small raster helpers.

Conventions used across the package:

* images are float64 arrays, ``(H, W)`` or ``(H, W, C)``, values nominally
  in [0, 1];
* depth maps are float64 ``(H, W)`` arrays where 0 encodes "invalid";
* masks are boolean ``(H, W)`` arrays;
* integer pixel coordinates address pixel centers, so the valid continuous
  image domain is ``[0, W-1] x [0, H-1]``.
"""

from __future__ import annotations

import numpy as np

# Rec. 601 luma weights for RGB -> single channel conversion.
_LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def ensure_channels(img: np.ndarray) -> np.ndarray:
    """Return ``img`` as (H, W, C), adding a singleton channel axis if needed."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 2:
        return a[:, :, None]
    if a.ndim == 3:
        return a
    raise ValueError(f"expected a 2-d or 3-d image array, got shape {a.shape}")


def to_luma(img: np.ndarray) -> np.ndarray:
    """Collapse an image to a single (H, W) luma channel.

    Single-channel input is passed through; 3-channel input is combined
    with Rec. 601 weights. Other channel counts are rejected.
    """
    a = ensure_channels(img)
    if a.shape[2] == 1:
        return a[:, :, 0]
    if a.shape[2] == 3:
        w = _LUMA_WEIGHTS
        return w[0] * a[:, :, 0] + w[1] * a[:, :, 1] + w[2] * a[:, :, 2]
    raise ValueError(f"expected 1 or 3 channels, got {a.shape[2]}")


def valid_mask(depth: np.ndarray) -> np.ndarray:
    """Boolean validity mask of a depth map (0 encodes invalid)."""
    return np.asarray(depth) > 0.0


def forward_diff_x(a: np.ndarray) -> np.ndarray:
    """Forward difference along columns; the last column is 0."""
    out = np.zeros_like(a)
    out[:, :-1] = a[:, 1:] - a[:, :-1]
    return out


def forward_diff_y(a: np.ndarray) -> np.ndarray:
    """Forward difference along rows; the last row is 0."""
    out = np.zeros_like(a)
    out[:-1, :] = a[1:, :] - a[:-1, :]
    return out


def second_diff_x(a: np.ndarray) -> np.ndarray:
    """Three-point second difference along columns; border columns are 0."""
    out = np.zeros_like(a)
    out[:, 1:-1] = a[:, 2:] - 2.0 * a[:, 1:-1] + a[:, :-2]
    return out


def second_diff_y(a: np.ndarray) -> np.ndarray:
    """Three-point second difference along rows; border rows are 0."""
    out = np.zeros_like(a)
    out[1:-1, :] = a[2:, :] - 2.0 * a[1:-1, :] + a[:-2, :]
    return out


def box_mean(a: np.ndarray, size: int) -> np.ndarray:
    """Mean over a ``size`` x ``size`` window with replicated borders.

    Works on (H, W) or (H, W, C) arrays; the window never spans channels.
    """
    if size < 1 or size % 2 == 0:
        raise ValueError("box window size must be a positive odd integer")
    from scipy.ndimage import uniform_filter1d

    out = np.asarray(a, dtype=np.float64)
    out = uniform_filter1d(out, size=size, axis=0, mode="nearest")
    out = uniform_filter1d(out, size=size, axis=1, mode="nearest")
    return out


def box3_mean(a: np.ndarray) -> np.ndarray:
    """3x3 replicate-border window mean (the SSIM window)."""
    return box_mean(a, 3)


def _box3_adjoint_1d(g: np.ndarray, axis: int) -> np.ndarray:
    """Adjoint of the 1-d size-3 replicate-border mean along ``axis``."""
    g = np.asarray(g, dtype=np.float64)
    n = g.shape[axis]
    if n == 1:
        return g.copy()
    sl = [slice(None)] * g.ndim

    def take(i):
        s = list(sl)
        s[axis] = i
        return tuple(s)

    out = np.zeros_like(g)
    # zero-padded neighbor sum
    out[take(slice(0, n - 1))] += g[take(slice(1, n))]
    out += g
    out[take(slice(1, n))] += g[take(slice(0, n - 1))]
    # replicated border cells absorb the out-of-range taps
    out[take(0)] += g[take(0)]
    out[take(n - 1)] += g[take(n - 1)]
    return out / 3.0


def box3_mean_adjoint(g: np.ndarray) -> np.ndarray:
    """Transpose of :func:`box3_mean` as a linear operator."""
    out = _box3_adjoint_1d(g, axis=1)
    out = _box3_adjoint_1d(out, axis=0)
    return out


def block_halve(a: np.ndarray) -> np.ndarray:
    """2x2 non-overlapping block mean; odd trailing rows/columns are dropped."""
    a = np.asarray(a, dtype=np.float64)
    h2, w2 = a.shape[0] // 2, a.shape[1] // 2
    if h2 < 1 or w2 < 1:
        raise ValueError(f"array of shape {a.shape} is too small to halve")
    c = a[: 2 * h2, : 2 * w2]
    if c.ndim == 2:
        c = c.reshape(h2, 2, w2, 2)
        return (c[:, 0, :, 0] + c[:, 0, :, 1] + c[:, 1, :, 0] + c[:, 1, :, 1]) / 4.0
    c = c.reshape(h2, 2, w2, 2, -1)
    return (c[:, 0, :, 0] + c[:, 0, :, 1] + c[:, 1, :, 0] + c[:, 1, :, 1]) / 4.0


def masked_block_halve(depth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Halve a depth map, averaging only valid (> 0) entries per 2x2 block.

    Returns ``(half, counts)`` where ``counts`` holds the number of valid
    contributors per block; blocks with no valid entry come out as 0.
    """
    d = np.asarray(depth, dtype=np.float64)
    h2, w2 = d.shape[0] // 2, d.shape[1] // 2
    if h2 < 1 or w2 < 1:
        raise ValueError(f"depth map of shape {d.shape} is too small to halve")
    c = d[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2)
    v = (c > 0.0).astype(np.float64)
    total = c[:, 0, :, 0] * v[:, 0, :, 0] + c[:, 0, :, 1] * v[:, 0, :, 1]
    total += c[:, 1, :, 0] * v[:, 1, :, 0] + c[:, 1, :, 1] * v[:, 1, :, 1]
    counts = v[:, 0, :, 0] + v[:, 0, :, 1] + v[:, 1, :, 0] + v[:, 1, :, 1]
    half = np.zeros((h2, w2), dtype=np.float64)
    np.divide(total, counts, out=half, where=counts > 0)
    return half, counts


def distribute_block_gradient(
    grad_half: np.ndarray, depth_full: np.ndarray, counts: np.ndarray
) -> np.ndarray:
    """Adjoint of :func:`masked_block_halve` with respect to the depth values.

    Each valid full-resolution pixel in a block receives
    ``grad_half / counts`` for that block; cropped remainder rows/columns
    receive 0.
    """
    d = np.asarray(depth_full, dtype=np.float64)
    h2, w2 = grad_half.shape
    share = np.zeros_like(grad_half)
    np.divide(grad_half, counts, out=share, where=counts > 0)
    up = np.repeat(np.repeat(share, 2, axis=0), 2, axis=1)
    out = np.zeros_like(d)
    region = out[: 2 * h2, : 2 * w2]
    region += up * (d[: 2 * h2, : 2 * w2] > 0.0)
    return out


def upsample_bilinear(level: np.ndarray, out_h: int, out_w: int, k: int) -> np.ndarray:
    """Upsample a pyramid-level grid back to full resolution.

    ``k`` is the number of 2x halvings that produced the level, so a full
    resolution coordinate ``x`` maps to level coordinate
    ``(x - (2**k - 1) / 2) / 2**k`` under the pixel-center convention of the
    block-mean downsampler. Samples are clamped to the level domain, which
    replicates border values past the outermost level-pixel centers.
    """
    a = np.asarray(level, dtype=np.float64)
    h, w = a.shape[:2]
    stride = float(2**k)
    offset = (stride - 1.0) / 2.0
    xs = (np.arange(out_w, dtype=np.float64) - offset) / stride
    ys = (np.arange(out_h, dtype=np.float64) - offset) / stride
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[None, :]
    fy = (ys - y0)[:, None]
    g00 = a[np.ix_(y0, x0)]
    g10 = a[np.ix_(y0, x1)]
    g01 = a[np.ix_(y1, x0)]
    g11 = a[np.ix_(y1, x1)]
    if a.ndim == 3:
        fx = fx[:, :, None]
        fy = fy[:, :, None]
    top = (1.0 - fx) * g00 + fx * g10
    bot = (1.0 - fx) * g01 + fx * g11
    return (1.0 - fy) * top + fy * bot
