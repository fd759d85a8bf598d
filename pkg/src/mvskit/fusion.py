"""Depth-map filtering and fusion into world-frame point clouds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraModel
from .grids import ensure_channels, valid_mask


@dataclass(frozen=True)
class FusionConfig:
    """Filtering and fusion thresholds."""

    prob_threshold: float = 0.6
    pixel_threshold: float = 1.0
    rel_depth_threshold: float = 0.01
    min_consistent_views: int = 2

    def __post_init__(self) -> None:
        if not (0.0 <= self.prob_threshold <= 1.0):
            raise ValueError("prob_threshold must lie in [0, 1]")
        if self.pixel_threshold < 0.0 or self.rel_depth_threshold < 0.0:
            raise ValueError("thresholds must be non-negative")
        if self.min_consistent_views < 1:
            raise ValueError("min_consistent_views must be >= 1")


@dataclass
class PointCloud:
    """World-frame points with optional per-point colors in [0, 1]."""

    points: np.ndarray
    colors: np.ndarray | None = None

    def __post_init__(self) -> None:
        p = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(p)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", p)
        if self.colors is not None:
            c = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
            if c.shape[0] != p.shape[0]:
                raise ValueError("colors must match points 1:1")
            object.__setattr__(self, "colors", c)

    def __len__(self) -> int:
        return self.points.shape[0]


def filter_by_probability(
    depth: np.ndarray, prob: np.ndarray, threshold: float
) -> np.ndarray:
    """Zero out depth wherever confidence falls below the threshold.

    The comparison is inclusive: probability exactly at the threshold keeps
    the pixel.
    """
    d = np.asarray(depth, dtype=np.float64)
    p = np.asarray(prob, dtype=np.float64)
    if d.shape != p.shape:
        raise ValueError("depth and probability maps must share a shape")
    out = d.copy()
    out[p < threshold] = 0.0
    return out


def _pixel_rays(h: int, w: int, cam: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    intr = cam.intrinsics
    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)
    xn = np.broadcast_to(((xs - intr.cx) / intr.fx)[None, :], (h, w))
    yn = np.broadcast_to(((ys - intr.cy) / intr.fy)[:, None], (h, w))
    return xn, yn


def _world_points(depth: np.ndarray, cam: CameraModel) -> np.ndarray:
    """Backproject every pixel to world coordinates (invalid pixels give junk)."""
    h, w = depth.shape
    xn, yn = _pixel_rays(h, w, cam)
    pts_cam = np.stack([xn * depth, yn * depth, depth], axis=2)
    inv = cam.world_to_camera.inverse()
    return pts_cam @ inv.rotation.T + inv.translation


def _project_world(points: np.ndarray, cam: CameraModel):
    """Project world points; returns (u, v, z) with z the camera depth."""
    p = points @ cam.world_to_camera.rotation.T + cam.world_to_camera.translation
    z = p[..., 2]
    safe = np.where(z > 0.0, z, 1.0)
    intr = cam.intrinsics
    u = intr.fx * (p[..., 0] / safe) + intr.cx
    v = intr.fy * (p[..., 1] / safe) + intr.cy
    return u, v, z


def _lookup(depth: np.ndarray, ui: np.ndarray, vi: np.ndarray) -> np.ndarray:
    h, w = depth.shape
    uc = np.clip(ui, 0, w - 1)
    vc = np.clip(vi, 0, h - 1)
    return depth[vc, uc]


def geometric_consistency_filter(
    depths: list[np.ndarray], cams: list[CameraModel], cfg: FusionConfig = FusionConfig()
) -> list[np.ndarray]:
    """Cross-view agreement masks for a set of depth maps.

    A pixel of view i survives when, in at least ``min_consistent_views - 1``
    other views, its 3D point lands on a valid pixel whose own stored depth
    round-trips back to within ``pixel_threshold`` pixels and
    ``rel_depth_threshold`` relative depth of the starting pixel.
    """
    if len(depths) != len(cams):
        raise ValueError("need one camera per depth map")
    masks = []
    for i, (di, ci) in enumerate(zip(depths, cams)):
        h, w = di.shape
        vi_mask = valid_mask(di)
        consistent = np.zeros((h, w), dtype=np.int64)
        if vi_mask.any():
            world = _world_points(di, ci)
            xs = np.broadcast_to(np.arange(w, dtype=np.float64)[None, :], (h, w))
            ys = np.broadcast_to(np.arange(h, dtype=np.float64)[:, None], (h, w))
            for j, (dj, cj) in enumerate(zip(depths, cams)):
                if j == i:
                    continue
                u, v, z = _project_world(world, cj)
                ui = np.rint(u).astype(np.int64)
                vi = np.rint(v).astype(np.int64)
                inb = (z > 0.0) & (ui >= 0) & (ui <= dj.shape[1] - 1)
                inb &= (vi >= 0) & (vi <= dj.shape[0] - 1)
                zj = _lookup(dj, ui, vi)
                hit = inb & (zj > 0.0)
                # backproject the landed pixel at its stored depth, re-project into i
                hj, wj = dj.shape
                intr_j = cj.intrinsics
                xnj = (ui - intr_j.cx) / intr_j.fx
                ynj = (vi - intr_j.cy) / intr_j.fy
                pts_j = np.stack([xnj * zj, ynj * zj, zj], axis=2)
                inv_j = cj.world_to_camera.inverse()
                back_world = pts_j @ inv_j.rotation.T + inv_j.translation
                u2, v2, z2 = _project_world(back_world, ci)
                ok = hit & (z2 > 0.0)
                err_px = np.sqrt((u2 - xs) ** 2 + (v2 - ys) ** 2)
                err_z = np.abs(z2 - di)
                ok &= err_px <= cfg.pixel_threshold
                ok &= err_z <= cfg.rel_depth_threshold * np.abs(di)
                consistent += ok
        masks.append(vi_mask & (consistent >= cfg.min_consistent_views - 1))
    return masks


def fuse_depth_maps(
    depths: list[np.ndarray],
    masks: list[np.ndarray],
    cams: list[CameraModel],
    images: list[np.ndarray] | None = None,
    cfg: FusionConfig = FusionConfig(),
) -> PointCloud:
    """Merge filtered depth maps into one averaged world-frame cloud.

    Views are visited in index order; every surviving, not yet claimed pixel
    seeds a group, claims the pixels its 3D point lands on in later-visited
    views (when they agree within the consistency thresholds), and the
    group's backprojected points are averaged into a single output point.
    First visit wins, so each pixel contributes to exactly one point and
    the output is deterministic.
    """
    if len(depths) != len(cams) or len(masks) != len(depths):
        raise ValueError("depths, masks and cameras must align")
    if images is not None and len(images) != len(depths):
        raise ValueError("need one image per view when colors are requested")

    claimed = [np.zeros_like(m, dtype=bool) for m in masks]
    world_all = [_world_points(d, c) for d, c in zip(depths, cams)]
    colors_all = None
    if images is not None:
        colors_all = []
        for img in images:
            a = ensure_channels(img)
            if a.shape[2] == 1:
                a = np.repeat(a, 3, axis=2)
            colors_all.append(a[:, :, :3])

    pts_out: list[np.ndarray] = []
    col_out: list[np.ndarray] = []
    for i in range(len(depths)):
        seeds = masks[i] & ~claimed[i] & valid_mask(depths[i])
        if not seeds.any():
            continue
        sy, sx = np.nonzero(seeds)
        acc = world_all[i][sy, sx].astype(np.float64).copy()
        cnt = np.ones(len(sy))
        if colors_all is not None:
            cacc = colors_all[i][sy, sx].copy()
        claimed[i][sy, sx] = True
        for j in range(len(depths)):
            if j == i:
                continue
            u, v, z = _project_world(world_all[i][sy, sx], cams[j])
            ui = np.rint(u).astype(np.int64)
            vi = np.rint(v).astype(np.int64)
            hj, wj = depths[j].shape
            ok = (z > 0.0) & (ui >= 0) & (ui <= wj - 1) & (vi >= 0) & (vi <= hj - 1)
            uis = np.clip(ui, 0, wj - 1)
            vis = np.clip(vi, 0, hj - 1)
            zj = depths[j][vis, uis]
            ok &= masks[j][vis, uis] & ~claimed[j][vis, uis] & (zj > 0.0)
            ok &= np.sqrt((u - uis) ** 2 + (v - vis) ** 2) <= cfg.pixel_threshold
            ok &= np.abs(z - zj) <= cfg.rel_depth_threshold * np.abs(zj)
            if not ok.any():
                continue
            # first seed (row-major order) wins when several land on one pixel
            flat = vis * wj + uis
            order = np.arange(len(flat))
            keep = np.zeros(len(flat), dtype=bool)
            seen: set[int] = set()
            for idx in order:
                if not ok[idx]:
                    continue
                f = int(flat[idx])
                if f in seen:
                    continue
                seen.add(f)
                keep[idx] = True
            member_world = world_all[j][vis[keep], uis[keep]]
            acc[keep] += member_world
            cnt[keep] += 1.0
            if colors_all is not None:
                cacc[keep] += colors_all[j][vis[keep], uis[keep]]
            claimed[j][vis[keep], uis[keep]] = True
        pts_out.append(acc / cnt[:, None])
        if colors_all is not None:
            col_out.append(cacc / cnt[:, None])

    if not pts_out:
        return PointCloud(points=np.zeros((0, 3)), colors=None if images is None else np.zeros((0, 3)))
    points = np.concatenate(pts_out, axis=0)
    colors = np.concatenate(col_out, axis=0) if colors_all is not None else None
    return PointCloud(points=points, colors=colors)
