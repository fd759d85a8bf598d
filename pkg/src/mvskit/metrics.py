"""Point-cloud and depth-map quality metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree


DEFAULT_DISTANCE_CLIP = 20.0
DEPTH_ERROR_THRESHOLDS = (2.0, 4.0, 8.0)


@dataclass(frozen=True)
class MetricReport:
    """Symmetric cloud distances, in scene units (millimetres here)."""

    accuracy: float
    completeness: float
    overall: float


def nearest_distances(query: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Distance from each query point to its nearest reference point."""
    q = np.asarray(query, dtype=np.float64).reshape(-1, 3)
    r = np.asarray(reference, dtype=np.float64).reshape(-1, 3)
    if q.shape[0] == 0:
        return np.zeros(0)
    if r.shape[0] == 0:
        raise ValueError("reference cloud is empty")
    tree = cKDTree(r)
    dist, _ = tree.query(q, k=1)
    return np.asarray(dist, dtype=np.float64)


def cloud_metrics(
    predicted: np.ndarray,
    reference: np.ndarray,
    distance_clip: float = DEFAULT_DISTANCE_CLIP,
) -> MetricReport:
    """Mean nearest-neighbour distances between two clouds.

    accuracy     mean over predicted points of the (clipped) distance to the
                 nearest reference point
    completeness mean over reference points of the (clipped) distance to the
                 nearest predicted point
    overall      arithmetic mean of the two

    Distances are clipped at ``distance_clip`` before averaging so a few
    gross outliers cannot dominate.
    """
    p = np.asarray(predicted, dtype=np.float64).reshape(-1, 3)
    r = np.asarray(reference, dtype=np.float64).reshape(-1, 3)
    if p.shape[0] == 0 or r.shape[0] == 0:
        raise ValueError("both clouds must be non-empty")
    if distance_clip <= 0.0:
        raise ValueError("distance_clip must be positive")
    acc = float(np.mean(np.minimum(nearest_distances(p, r), distance_clip)))
    comp = float(np.mean(np.minimum(nearest_distances(r, p), distance_clip)))
    return MetricReport(accuracy=acc, completeness=comp, overall=0.5 * (acc + comp))


def depth_error_percentages(
    predicted: np.ndarray,
    reference: np.ndarray,
    thresholds: tuple[float, ...] = DEPTH_ERROR_THRESHOLDS,
    border: int = 0,
) -> dict[float, float]:
    """Percentage of valid pixels with |error| strictly below each threshold.

    A pixel counts when both maps mark it valid (depth > 0).  ``border``
    rows/columns on every side can be excluded from the count.
    """
    p = np.asarray(predicted, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    if p.shape != r.shape:
        raise ValueError("depth maps must share a shape")
    if border < 0:
        raise ValueError("border must be non-negative")
    if border > 0:
        if 2 * border >= min(p.shape):
            raise ValueError("border leaves no interior pixels")
        p = p[border:-border, border:-border]
        r = r[border:-border, border:-border]
    valid = (p > 0.0) & (r > 0.0)
    n = int(valid.sum())
    out: dict[float, float] = {}
    err = np.abs(p - r)
    for t in thresholds:
        if n == 0:
            out[float(t)] = 0.0
        else:
            out[float(t)] = 100.0 * float(np.count_nonzero(valid & (err < t))) / n
    return out
