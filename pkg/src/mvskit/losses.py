"""Multi-metric consistency losses on warped views.

Three pixel-level terms (photometric L1 with gradients, windowed structural
similarity, edge-aware smoothness) plus multi-scale feature consistency are
combined into a per-view total. All image-comparison terms are means over
valid warp pixels; an empty mask makes each such term 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import CameraModel, intrinsics_for_level, relative_transform
from .features import FeaturePyramid
from .grids import (
    box3_mean,
    ensure_channels,
    forward_diff_x,
    forward_diff_y,
    masked_block_halve,
    second_diff_x,
    second_diff_y,
    to_luma,
)
from .warp import warp_image

# Stabilization constants of the structural-similarity ratio for unit-range
# images: (0.01 L)^2 and (0.03 L)^2 with L = 1.
SSIM_C1 = 1e-4
SSIM_C2 = 9e-4


@dataclass(frozen=True)
class LossWeights:
    """Term and scale weights of the combined loss."""

    gamma1: float = 1.0   # pixel-term weight
    gamma2: float = 1.0   # feature-term weight
    lambda1: float = 0.8  # photometric
    lambda2: float = 0.2  # structural similarity
    lambda3: float = 0.067  # smoothness
    beta1: float = 0.2    # feature scale 1/2
    beta2: float = 0.8    # feature scale 1/4
    beta3: float = 0.4    # feature scale 1/8
    alpha2: float = 0.5   # first-order smoothness edge sensitivity
    alpha3: float = 0.5   # second-order smoothness edge sensitivity

    def __post_init__(self) -> None:
        for name in (
            "gamma1", "gamma2", "lambda1", "lambda2", "lambda3",
            "beta1", "beta2", "beta3", "alpha2", "alpha3",
        ):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class View:
    """One calibrated view: full-resolution image, feature pyramid, camera."""

    image: np.ndarray
    camera: CameraModel
    pyramid: FeaturePyramid | None = None


@dataclass
class LossBreakdown:
    """Weighted total plus its unweighted components.

    Component fields are sums over source views (the smoothness term, which
    depends only on the reference and the depth map, is counted once per
    view). ``pixel`` always equals
    ``lambda1 * photo + lambda2 * ssim + lambda3 * smooth`` and ``total``
    equals ``gamma1 * pixel + gamma2 * feature`` up to round-off.
    """

    photo: float = 0.0
    ssim: float = 0.0
    smooth: float = 0.0
    pixel: float = 0.0
    feature_per_scale: tuple[float, float, float] = (0.0, 0.0, 0.0)
    feature: float = 0.0
    total: float = 0.0
    valid_pixel_count: int = 0
    total_pixel_count: int = 0
    per_view: list[dict] = field(default_factory=list)


def _gradient_gates(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward-difference validity: both endpoints inside the mask."""
    gate_x = np.zeros_like(mask, dtype=bool)
    gate_y = np.zeros_like(mask, dtype=bool)
    gate_x[:, :-1] = mask[:, :-1] & mask[:, 1:]
    gate_y[:-1, :] = mask[:-1, :] & mask[1:, :]
    return gate_x, gate_y


def photometric_loss(ref: np.ndarray, warped: np.ndarray, mask: np.ndarray) -> float:
    """Masked mean absolute difference of values and forward gradients.

    Per valid pixel, channels contribute ``|ref - warped|`` plus the
    absolute difference of the forward x/y differences; a difference term
    only counts where both of its endpoint pixels are valid, which keeps
    the mean independent of content hidden behind the mask. An empty mask
    gives 0.
    """
    r = ensure_channels(ref)
    w = ensure_channels(warped)
    m = np.asarray(mask, dtype=bool)
    count = int(m.sum())
    if count == 0:
        return 0.0
    gate_x, gate_y = _gradient_gates(m)
    total = 0.0
    for c in range(r.shape[2]):
        rc, wc = r[:, :, c], w[:, :, c]
        total += float(np.sum(np.abs(rc - wc) * m))
        total += float(np.sum(np.abs(forward_diff_x(rc) - forward_diff_x(wc)) * gate_x))
        total += float(np.sum(np.abs(forward_diff_y(rc) - forward_diff_y(wc)) * gate_y))
    return total / count


def ssim_map(ref: np.ndarray, warped: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Per-pixel structural similarity with 3x3 window means.

    Invalid warped pixels are replaced by the reference content before the
    windowed statistics, so windows straddling the mask edge are not
    polluted by the zeros that encode invalid samples.
    """
    r = ensure_channels(ref)
    w = ensure_channels(warped)
    m = np.asarray(mask, dtype=bool)
    filled = np.where(m[:, :, None], w, r)
    mu1 = box3_mean(r)
    mu2 = box3_mean(filled)
    e11 = box3_mean(r * r)
    e22 = box3_mean(filled * filled)
    e12 = box3_mean(r * filled)
    var1 = e11 - mu1 * mu1
    var2 = e22 - mu2 * mu2
    cov = e12 - mu1 * mu2
    s = ((2.0 * mu1 * mu2 + SSIM_C1) * (2.0 * cov + SSIM_C2)) / (
        (mu1 * mu1 + mu2 * mu2 + SSIM_C1) * (var1 + var2 + SSIM_C2)
    )
    return np.mean(s, axis=2)


def ssim_loss(ref: np.ndarray, warped: np.ndarray, mask: np.ndarray) -> float:
    """Masked mean of ``(1 - S) / 2`` over the per-pixel similarity map."""
    m = np.asarray(mask, dtype=bool)
    count = int(m.sum())
    if count == 0:
        return 0.0
    s = ssim_map(ref, warped, mask)
    return float(np.sum((1.0 - s) * 0.5 * m)) / count


def smoothness_loss(
    depth: np.ndarray,
    image: np.ndarray,
    alpha2: float = 0.5,
    alpha3: float = 0.5,
    depth_range: tuple[float, float] = (425.0, 935.0),
) -> float:
    """Edge-aware first- plus second-order depth smoothness.

    The depth map is divided by the hypothesis range width so the value is
    insensitive to the absolute depth scale; differences are taken per axis
    and weighted by ``exp(-alpha |same-order image difference|)``. The mean
    runs over all pixels.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("smoothness expects a single-channel reference image")
    d_min, d_max = depth_range
    if not d_max > d_min:
        raise ValueError("depth range must have positive width")
    u = np.asarray(depth, dtype=np.float64) / (d_max - d_min)
    total = (
        np.sum(np.exp(-alpha2 * np.abs(forward_diff_x(img))) * np.abs(forward_diff_x(u)))
        + np.sum(np.exp(-alpha2 * np.abs(forward_diff_y(img))) * np.abs(forward_diff_y(u)))
        + np.sum(np.exp(-alpha3 * np.abs(second_diff_x(img))) * np.abs(second_diff_x(u)))
        + np.sum(np.exp(-alpha3 * np.abs(second_diff_y(img))) * np.abs(second_diff_y(u)))
    )
    return float(total) / u.size


def pixel_loss(
    ref: np.ndarray,
    warped: np.ndarray,
    mask: np.ndarray,
    depth: np.ndarray,
    weights: LossWeights = LossWeights(),
    depth_range: tuple[float, float] = (425.0, 935.0),
) -> tuple[float, dict]:
    """Weighted pixel-level loss with its component values."""
    photo = photometric_loss(ref, warped, mask)
    ssim = ssim_loss(ref, warped, mask)
    smooth = smoothness_loss(
        depth, to_luma(ref), weights.alpha2, weights.alpha3, depth_range
    )
    value = weights.lambda1 * photo + weights.lambda2 * ssim + weights.lambda3 * smooth
    return value, {"photo": photo, "ssim": ssim, "smooth": smooth}


def feature_loss_scale(
    ref_features: np.ndarray,
    src_features: np.ndarray,
    depth: np.ndarray,
    ref_cam: CameraModel,
    src_cam: CameraModel,
    halvings: int,
) -> tuple[float, int]:
    """Feature consistency at one pyramid level.

    The full-resolution depth map is block-averaged (valid entries only)
    down to the level's grid, the source features are warped through it
    with correspondingly halved intrinsics, and the per-channel L1
    difference is averaged over valid warp pixels. Returns the loss and the
    valid-pixel count.
    """
    rf = ensure_channels(ref_features)
    sf = ensure_channels(src_features)
    d = np.asarray(depth, dtype=np.float64)
    for _ in range(halvings):
        d, _ = masked_block_halve(d)
    if d.shape != rf.shape[:2]:
        raise ValueError(
            f"downsampled depth {d.shape} does not match feature grid {rf.shape[:2]}"
        )
    ref_intr = intrinsics_for_level(ref_cam.intrinsics, halvings)
    src_intr = intrinsics_for_level(src_cam.intrinsics, halvings)
    rel = relative_transform(ref_cam, src_cam)
    warped, mask = warp_image(sf, d, ref_intr, src_intr, rel)
    count = int(mask.sum())
    if count == 0:
        return 0.0, 0
    diff = np.abs(rf - warped) * mask[:, :, None]
    return float(diff.sum()) / count, count


def feature_loss(
    ref_pyramid: FeaturePyramid,
    src_pyramid: FeaturePyramid,
    depth: np.ndarray,
    ref_cam: CameraModel,
    src_cam: CameraModel,
    weights: LossWeights = LossWeights(),
) -> tuple[float, tuple[float, float, float]]:
    """Scale-weighted sum of per-level feature losses (levels 1/2, 1/4, 1/8)."""
    if len(ref_pyramid.levels) != 3 or len(src_pyramid.levels) != 3:
        raise ValueError("feature loss expects three-level pyramids")
    betas = (weights.beta1, weights.beta2, weights.beta3)
    per_scale = []
    for k in range(3):
        value, _ = feature_loss_scale(
            ref_pyramid.levels[k].features,
            src_pyramid.levels[k].features,
            depth, ref_cam, src_cam, halvings=k + 1,
        )
        per_scale.append(value)
    combined = betas[0] * per_scale[0] + betas[1] * per_scale[1] + betas[2] * per_scale[2]
    return combined, tuple(per_scale)


def total_loss(
    ref_view: View,
    src_views: list[View],
    depth: np.ndarray,
    weights: LossWeights = LossWeights(),
    depth_range: tuple[float, float] = (425.0, 935.0),
) -> LossBreakdown:
    """Combined loss over all source views.

    Per source view the pixel term (photometric + structural + smoothness)
    and the feature term are formed and combined as
    ``gamma1 * pixel + gamma2 * feature``; the totals and components are
    summed over views. Requires pyramids on all views when ``gamma2 > 0``.
    """
    if not src_views:
        raise ValueError("need at least one source view")
    d = np.asarray(depth, dtype=np.float64)
    ref_img = np.asarray(ref_view.image, dtype=np.float64)
    bd = LossBreakdown(total_pixel_count=d.size)

    smooth = smoothness_loss(
        d, to_luma(ref_img), weights.alpha2, weights.alpha3, depth_range
    )

    use_features = weights.gamma2 > 0.0
    if use_features and (ref_view.pyramid is None or any(v.pyramid is None for v in src_views)):
        raise ValueError("feature term requested but a view is missing its pyramid")

    feature_scales = np.zeros(3)
    for sv in src_views:
        rel = relative_transform(ref_view.camera, sv.camera)
        warped, mask = warp_image(
            sv.image, d, ref_view.camera.intrinsics, sv.camera.intrinsics, rel
        )
        photo = photometric_loss(ref_img, warped, mask)
        ssim = ssim_loss(ref_img, warped, mask)
        pixel = weights.lambda1 * photo + weights.lambda2 * ssim + weights.lambda3 * smooth
        if use_features:
            feat, per_scale = feature_loss(
                ref_view.pyramid, sv.pyramid, d,
                ref_view.camera, sv.camera, weights,
            )
        else:
            feat, per_scale = 0.0, (0.0, 0.0, 0.0)
        view_total = weights.gamma1 * pixel + weights.gamma2 * feat

        bd.photo += photo
        bd.ssim += ssim
        bd.smooth += smooth
        bd.pixel += pixel
        feature_scales += np.asarray(per_scale)
        bd.feature += feat
        bd.total += view_total
        bd.valid_pixel_count += int(mask.sum())
        bd.per_view.append(
            {
                "photo": photo, "ssim": ssim, "smooth": smooth, "pixel": pixel,
                "feature": feat, "feature_per_scale": per_scale,
                "total": view_total, "valid_pixel_count": int(mask.sum()),
            }
        )
    bd.feature_per_scale = tuple(float(x) for x in feature_scales)
    return bd
