"""Plane-sweep cost volumes and soft-argmin depth regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import threading as mvthreading
from .camera import CameraIntrinsics, CameraModel, RigidTransform, relative_transform
from .grids import ensure_channels
from .warp import warp_image

#: Cost assigned where fewer than two views contribute (no variance defined).
DEFAULT_INVALID_COST = 1e3

#: Default softmax temperature for the bare operations. Pipelines usually
#: want a much smaller value (see the config default) so the probability mass
#: concentrates: across-view feature variances separate correct from
#: incorrect hypotheses by only 1e-3..1e-1.
DEFAULT_TEMPERATURE = 1.0


@dataclass(frozen=True)
class DepthHypotheses:
    """Uniformly spaced fronto-parallel depth hypotheses."""

    d_min: float
    d_max: float
    count: int

    def __post_init__(self) -> None:
        if not (0.0 < self.d_min < self.d_max):
            raise ValueError("need 0 < d_min < d_max")
        if self.count < 2:
            raise ValueError("need at least two hypotheses")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.d_min, self.d_max, self.count)

    @property
    def spacing(self) -> float:
        return (self.d_max - self.d_min) / (self.count - 1)


def _variance_slice(
    ref: np.ndarray,
    srcs: list[np.ndarray],
    rels: list[RigidTransform],
    ref_intr: CameraIntrinsics,
    src_intrs: list[CameraIntrinsics],
    depth_value: float,
    invalid_cost: float,
) -> np.ndarray:
    h, w, nc = ref.shape
    plane = np.full((h, w), depth_value)
    acc = ref.copy()
    count = np.ones((h, w))
    warped_list = []
    for s, rel, intr in zip(srcs, rels, src_intrs):
        warped, mask = warp_image(s, plane, ref_intr, intr, rel)
        warped_list.append((warped, mask))
        acc += warped
        count += mask
    mean = acc / count[:, :, None]
    ssd = (ref - mean) ** 2
    for warped, mask in warped_list:
        ssd += mask[:, :, None] * (warped - mean) ** 2
    var = ssd / count[:, :, None]
    cost = var[:, :, 0].copy()
    for c in range(1, nc):
        cost += var[:, :, c]
    cost /= nc
    cost[count < 2] = invalid_cost
    return cost


def build_cost_volume(
    ref_features: np.ndarray,
    src_features: list[np.ndarray],
    cams: list[CameraModel],
    hyp: DepthHypotheses,
    invalid_cost: float = DEFAULT_INVALID_COST,
) -> np.ndarray:
    """Across-view feature variance for every depth hypothesis.

    ``cams[0]`` is the reference view, ``cams[1:]`` correspond to
    ``src_features`` in order. For each hypothesis, every source feature map
    is warped into the reference view at constant depth; the per-pixel cost
    is the population variance across contributing views (the reference
    always contributes, a source contributes where its warp mask is set)
    averaged over channels. Pixels with fewer than two contributors get
    ``invalid_cost``. The result is (D, H, W).
    """
    ref = ensure_channels(ref_features)
    srcs = [ensure_channels(s) for s in src_features]
    if not srcs:
        raise ValueError("need at least one source view")
    if len(cams) != 1 + len(srcs):
        raise ValueError("camera list must cover the reference plus every source")
    for s in srcs:
        if s.shape[2] != ref.shape[2]:
            raise ValueError("feature channel counts must agree across views")
    ref_intr = cams[0].intrinsics
    if (ref_intr.height, ref_intr.width) != ref.shape[:2]:
        raise ValueError("reference intrinsics do not match the feature grid")
    rels = [relative_transform(cams[0], c) for c in cams[1:]]
    src_intrs = [c.intrinsics for c in cams[1:]]

    values = hyp.values
    volume = np.empty((hyp.count, ref.shape[0], ref.shape[1]))

    def make_task(index: int, value: float):
        def task():
            volume[index] = _variance_slice(
                ref, srcs, rels, ref_intr, src_intrs, value, invalid_cost
            )
            return None

        return task

    mvthreading.run_tasks([make_task(i, float(v)) for i, v in enumerate(values)])
    return volume


def regularize_volume(volume: np.ndarray, radius: int = 1, passes: int = 1) -> np.ndarray:
    """Separable box smoothing of a cost volume along H, W and D.

    Borders are replicated, so constant volumes are fixed points. A radius
    or pass count of zero returns an unsmoothed copy.
    """
    if radius < 0 or passes < 0:
        raise ValueError("radius and passes must be non-negative")
    from scipy.ndimage import uniform_filter1d

    out = np.array(volume, dtype=np.float64)
    if radius == 0 or passes == 0:
        return out
    size = 2 * radius + 1
    for _ in range(passes):
        out = uniform_filter1d(out, size=size, axis=1, mode="nearest")
        out = uniform_filter1d(out, size=size, axis=2, mode="nearest")
        out = uniform_filter1d(out, size=size, axis=0, mode="nearest")
    return out


def softmax_probability(
    volume: np.ndarray, temperature: float = DEFAULT_TEMPERATURE
) -> np.ndarray:
    """Per-pixel softmax over negative cost along the hypothesis axis.

    The per-pixel minimum cost is subtracted before exponentiation, so
    arbitrarily large costs are handled without overflow.
    """
    if not temperature > 0.0:
        raise ValueError("temperature must be positive")
    v = np.asarray(volume, dtype=np.float64)
    shifted = v - v.min(axis=0, keepdims=True)
    e = np.exp(-shifted / temperature)
    return e / e.sum(axis=0, keepdims=True)


def soft_argmin(prob: np.ndarray, hyp: DepthHypotheses) -> np.ndarray:
    """Probability-weighted mean of the hypothesis depths per pixel."""
    p = np.asarray(prob, dtype=np.float64)
    if p.shape[0] != hyp.count:
        raise ValueError("probability volume does not match the hypothesis count")
    depth = np.tensordot(hyp.values, p, axes=(0, 0))
    # Guard against round-off nudging the weighted mean past the range ends.
    return np.clip(depth, hyp.d_min, hyp.d_max)


def soft_argmin_gradient(
    volume: np.ndarray,
    hyp: DepthHypotheses,
    temperature: float = DEFAULT_TEMPERATURE,
) -> np.ndarray:
    """Derivative of the regressed depth with respect to each cost entry.

    For probabilities ``p = softmax(-cost / T)`` and regressed depth ``Z``,
    the derivative with respect to ``cost[k]`` is ``-p[k] (v[k] - Z) / T``.
    """
    p = softmax_probability(volume, temperature)
    depth = np.tensordot(hyp.values, p, axes=(0, 0))
    values = hyp.values[:, None, None]
    return -(p * (values - depth[None])) / temperature


def probability_map(
    prob: np.ndarray, depth: np.ndarray, hyp: DepthHypotheses, window: int = 4
) -> np.ndarray:
    """Confidence map: probability mass near the regressed depth.

    Sums the probabilities of the ``window`` hypotheses closest to each
    pixel's regressed depth (a contiguous index block, clamped at the volume
    ends). With a uniform probability volume this gives ``window / D``.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    p = np.asarray(prob, dtype=np.float64)
    d, h, w = p.shape
    if d != hyp.count:
        raise ValueError("probability volume does not match the hypothesis count")
    window = min(window, d)
    step = hyp.spacing
    k = np.rint((np.asarray(depth) - hyp.d_min) / step).astype(np.int64)
    np.clip(k, 0, d - 1, out=k)
    start = np.clip(k - (window - 1) // 2, 0, d - window)
    csum = np.concatenate([np.zeros((1, h, w)), np.cumsum(p, axis=0)], axis=0)
    upper = np.take_along_axis(csum, (start + window)[None], axis=0)[0]
    lower = np.take_along_axis(csum, start[None], axis=0)[0]
    return np.clip(upper - lower, 0.0, 1.0)
