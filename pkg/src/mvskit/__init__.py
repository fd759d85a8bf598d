"""Multi-view stereo toolkit.

Calibrated plane-sweep depth estimation with hand-built feature pyramids,
normal-guided and gradient-descent depth refinement, photometric/structural/
smoothness and feature-space consistency losses with analytic depth
gradients, depth-map fusion into point clouds, and evaluation metrics —
plus a synthetic-scene generator with exact ground truth and a CLI tying
the pieces together.

The warp inner loop has two interchangeable backends (pure NumPy and a
compiled extension) selected at import time; see ``mvskit._kernels``.
"""

from .camera import (
    BOUNDARY_TOL,
    BehindCameraError,
    CameraIntrinsics,
    CameraModel,
    RigidTransform,
    TransferResult,
    backproject,
    halve_intrinsics,
    intrinsics_for_level,
    project,
    relative_transform,
    transfer_pixel,
)
from .features import (
    FeatureConfig,
    FeaturePyramid,
    PyramidLevel,
    contrast_normalize,
    downsample_half,
    extract_pyramid,
    raw_feature_channels,
)
from .fusion import (
    FusionConfig,
    PointCloud,
    filter_by_probability,
    fuse_depth_maps,
    geometric_consistency_filter,
)
from .gradients import (
    GradientReport,
    RefineConfig,
    finite_difference_gradient,
    loss_gradient,
    random_two_view_instance,
    refine_depth_gd,
)
from .losses import (
    LossBreakdown,
    LossWeights,
    View,
    photometric_loss,
    pixel_loss,
    smoothness_loss,
    ssim_loss,
    total_loss,
)
from .metrics import MetricReport, cloud_metrics, depth_error_percentages
from .normals import (
    depth_from_normal,
    edge_weights,
    normal_from_depth,
    refine_depth_nd,
)
from .planesweep import (
    DepthHypotheses,
    build_cost_volume,
    probability_map,
    regularize_volume,
    soft_argmin,
    softmax_probability,
)
from .scene import (
    CheckerTexture,
    FlatBorderTexture,
    ImageTexture,
    NoiseTexture,
    PlaneGeometry,
    RenderedView,
    SceneError,
    SceneSpec,
    SphereGeometry,
    make_translation_rig,
    render_scene,
)
from .threading import get_num_threads, set_num_threads
from .warp import warp_between, warp_image, warp_with_jacobian
from ._kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BOUNDARY_TOL",
    "BehindCameraError",
    "CameraIntrinsics",
    "CameraModel",
    "CheckerTexture",
    "DepthHypotheses",
    "FeatureConfig",
    "FeaturePyramid",
    "FlatBorderTexture",
    "FusionConfig",
    "GradientReport",
    "ImageTexture",
    "LossBreakdown",
    "LossWeights",
    "MetricReport",
    "NoiseTexture",
    "PlaneGeometry",
    "PointCloud",
    "PyramidLevel",
    "RefineConfig",
    "RenderedView",
    "RigidTransform",
    "SceneError",
    "SceneSpec",
    "SphereGeometry",
    "TransferResult",
    "View",
    "backproject",
    "build_cost_volume",
    "cloud_metrics",
    "contrast_normalize",
    "depth_error_percentages",
    "depth_from_normal",
    "downsample_half",
    "edge_weights",
    "extract_pyramid",
    "filter_by_probability",
    "finite_difference_gradient",
    "fuse_depth_maps",
    "geometric_consistency_filter",
    "get_num_threads",
    "halve_intrinsics",
    "intrinsics_for_level",
    "loss_gradient",
    "make_translation_rig",
    "normal_from_depth",
    "photometric_loss",
    "pixel_loss",
    "probability_map",
    "project",
    "random_two_view_instance",
    "raw_feature_channels",
    "refine_depth_gd",
    "refine_depth_nd",
    "regularize_volume",
    "relative_transform",
    "render_scene",
    "set_num_threads",
    "smoothness_loss",
    "soft_argmin",
    "softmax_probability",
    "ssim_loss",
    "total_loss",
    "transfer_pixel",
    "warp_between",
    "warp_image",
    "warp_with_jacobian",
    "__version__",
]
