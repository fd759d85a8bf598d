"""Command-line pipeline: scene generation, depth, refinement, fusion, eval.

Commands operate on a scene directory as written by ``gen-scene``:

    cameras.json          rig calibration and the scene depth range
    view_XXXX.pfm/.ppm    rendered images (float PFM plus 8-bit PPM)
    depth_gt_XXXX.pfm     ground-truth depth per view
    effective.cfg         the fully-resolved configuration used

``--views a,b,c`` selects the working views; the first is the reference.
All outputs are deterministic for a fixed config, seed and ``--threads 1``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .camera import CameraIntrinsics, CameraModel, RigidTransform, intrinsics_for_level
from .config import Config, ConfigError, load_config
from .features import extract_pyramid
from .formats import (
    FormatError,
    read_depth,
    read_image,
    read_ply,
    write_ply,
    write_pfm,
    write_ppm,
)
from .fusion import (
    filter_by_probability,
    fuse_depth_maps,
    geometric_consistency_filter,
)
from .gradients import (
    RefineConfig,
    finite_difference_gradient,
    random_two_view_instance,
    refine_depth_gd,
)
from .grids import to_luma, upsample_bilinear
from .losses import View, total_loss
from .metrics import cloud_metrics, depth_error_percentages
from .normals import refine_depth_nd
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
    ground_truth_cloud,
    make_translation_rig,
    perturb_image,
    render_scene,
)
from .threading import set_num_threads

log = logging.getLogger("mvskit")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class CliError(ValueError):
    """A problem with command arguments or referenced files."""


def _configure_logging() -> None:
    name = os.environ.get("MVSKIT_LOG", "error")
    if name not in _LOG_LEVELS:
        raise CliError(
            f"MVSKIT_LOG must be one of {sorted(_LOG_LEVELS)}, got {name!r}"
        )
    logging.basicConfig(level=_LOG_LEVELS[name], format="%(levelname)s %(message)s")


# ---------------------------------------------------------------------------
# Scene directory I/O


def _camera_to_json(cam: CameraModel) -> dict:
    intr = cam.intrinsics
    pose = cam.world_to_camera
    return {
        "fx": intr.fx,
        "fy": intr.fy,
        "cx": intr.cx,
        "cy": intr.cy,
        "width": intr.width,
        "height": intr.height,
        "rotation": [[float(v) for v in row] for row in pose.rotation],
        "translation": [float(v) for v in pose.translation],
    }


def _camera_from_json(obj: dict) -> CameraModel:
    intr = CameraIntrinsics(
        fx=float(obj["fx"]),
        fy=float(obj["fy"]),
        cx=float(obj["cx"]),
        cy=float(obj["cy"]),
        width=int(obj["width"]),
        height=int(obj["height"]),
    )
    pose = RigidTransform(
        rotation=np.asarray(obj["rotation"], dtype=np.float64),
        translation=np.asarray(obj["translation"], dtype=np.float64),
    )
    return CameraModel(intrinsics=intr, world_to_camera=pose)


def _write_cameras(path: Path, cams, d_min: float, d_max: float) -> None:
    payload = {
        "depth_range": [float(d_min), float(d_max)],
        "views": [_camera_to_json(c) for c in cams],
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_cameras(path: Path):
    if not path.is_file():
        raise CliError(f"{path}: missing cameras.json (not a scene directory?)")
    try:
        payload = json.loads(path.read_text())
        cams = [_camera_from_json(v) for v in payload["views"]]
        d_min, d_max = (float(v) for v in payload["depth_range"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{path}: malformed cameras.json: {exc}") from exc
    return cams, (d_min, d_max)


def _view_image(scene_dir: Path, index: int) -> np.ndarray:
    """Grayscale image for one view, preferring the float PFM sidecar."""
    pfm = scene_dir / f"view_{index:04d}.pfm"
    ppm = scene_dir / f"view_{index:04d}.ppm"
    if pfm.is_file():
        return to_luma(read_image(pfm))
    if ppm.is_file():
        return to_luma(read_image(ppm))
    raise CliError(f"{scene_dir}: no image for view {index} ({pfm.name} or {ppm.name})")


def _read_view_depth(scene_dir: Path, prefix: str, index: int) -> np.ndarray:
    path = scene_dir / f"{prefix}_{index:04d}.pfm"
    if not path.is_file():
        raise CliError(f"{path}: missing depth map")
    return read_depth(path)


def _parse_views(text: str | None, total: int) -> list[int]:
    if text is None:
        views = list(range(total))
    else:
        try:
            views = [int(part) for part in text.split(",") if part != ""]
        except ValueError as exc:
            raise CliError(f"--views must be comma-separated integers: {exc}") from exc
    if not views:
        raise CliError("--views selected no views")
    if len(set(views)) != len(views):
        raise CliError("--views contains duplicates")
    for v in views:
        if not (0 <= v < total):
            raise CliError(f"--views index {v} out of range (scene has {total} views)")
    return views


def _scene_depth_range(cfg: Config, scene_range) -> tuple[float, float]:
    """Scene range from cameras.json unless the config overrides it."""
    d_min = cfg.get("depth", "d_min")
    d_max = cfg.get("depth", "d_max")
    if not cfg.is_provided("depth", "d_min"):
        d_min = scene_range[0]
    if not cfg.is_provided("depth", "d_max"):
        d_max = scene_range[1]
    return float(d_min), float(d_max)


def _out_dir(args, default: Path) -> Path:
    out = Path(args.out) if args.out is not None else default
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Commands


def _build_scene_spec(cfg: Config) -> SceneSpec:
    width = cfg.get("scene", "width")
    height = cfg.get("scene", "height")
    focal = cfg.get("scene", "focal")
    intr = CameraIntrinsics(
        fx=focal,
        fy=focal,
        cx=(width - 1) / 2.0,
        cy=(height - 1) / 2.0,
        width=width,
        height=height,
    )
    cams = make_translation_rig(intr, cfg.get("scene", "views"), cfg.get("scene", "baseline"))
    kind = cfg.get("scene", "geometry")
    if kind == "plane":
        geometry = PlaneGeometry(cfg.get("scene", "plane_normal"), cfg.get("scene", "plane_offset"))
    else:
        geometry = SphereGeometry(cfg.get("scene", "sphere_center"), cfg.get("scene", "sphere_radius"))
    tex = cfg.get("scene", "texture")
    if tex == "checker":
        texture = CheckerTexture(cfg.get("scene", "checker_period"))
    elif tex == "noise":
        texture = NoiseTexture(
            cfg.get("scene", "noise_seed"),
            cfg.get("scene", "noise_octaves"),
            cfg.get("scene", "noise_cell"),
        )
    else:
        path = cfg.get("scene", "texture_image")
        if not path:
            raise ConfigError("texture = image requires texture_image to be set")
        texture = ImageTexture(read_image(path))
    margin = cfg.get("scene", "texture_margin")
    if margin > 0.0:
        texture = FlatBorderTexture(texture, margin, width - 1.0 - margin)
    return SceneSpec(
        geometry=geometry,
        texture=texture,
        cameras=cams,
        width=width,
        height=height,
        d_min=cfg.get("depth", "d_min"),
        d_max=cfg.get("depth", "d_max"),
    )


def cmd_gen_scene(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.set_value("scene", "noise_seed", int(args.seed))
    if args.out is None:
        raise CliError("gen-scene requires --out DIR")
    out = _out_dir(args, Path(args.out))
    spec = _build_scene_spec(cfg)
    views = render_scene(spec)
    sigma = cfg.get("scene", "image_noise_sigma")
    if sigma > 0.0:
        rng = np.random.default_rng(cfg.get("scene", "noise_seed"))
        views = [v._replace(image=perturb_image(v.image, sigma, rng)) for v in views]
    for i, rv in enumerate(views):
        write_pfm(out / f"view_{i:04d}.pfm", rv.image)
        write_ppm(out / f"view_{i:04d}.ppm", rv.image)
        write_pfm(out / f"depth_gt_{i:04d}.pfm", rv.depth)
    _write_cameras(out / "cameras.json", spec.cameras, spec.d_min, spec.d_max)
    (out / "effective.cfg").write_text(cfg.dump_effective())
    log.info("rendered %d views at %dx%d", len(views), spec.width, spec.height)
    print(f"wrote {len(views)} views to {out}")
    return 0


def cmd_depth(args) -> int:
    cfg = load_config(args.config)
    scene_dir = Path(args.scene)
    cams, scene_range = _read_cameras(scene_dir / "cameras.json")
    views = _parse_views(args.views, len(cams))
    if len(views) < 2:
        raise CliError("depth needs at least two views (reference + sources)")
    out = _out_dir(args, scene_dir)
    d_min, d_max = _scene_depth_range(cfg, scene_range)
    hyp = DepthHypotheses(d_min=d_min, d_max=d_max, count=cfg.get("depth", "count"))
    level = cfg.get("depth", "feature_level")
    if not (0 <= level <= 2):
        raise ConfigError("feature_level must be 0, 1 or 2")
    halvings = level + 1
    fcfg = cfg.feature_config()

    images = {v: _view_image(scene_dir, v) for v in views}
    pyramids = {v: extract_pyramid(images[v], fcfg) for v in views}
    for ref in views:
        sources = [v for v in views if v != ref]
        ref_feat = pyramids[ref].levels[level].features
        src_feats = [pyramids[s].levels[level].features for s in sources]
        lvl_cams = [
            CameraModel(
                intrinsics=intrinsics_for_level(cams[v].intrinsics, halvings),
                world_to_camera=cams[v].world_to_camera,
            )
            for v in [ref, *sources]
        ]
        volume = build_cost_volume(ref_feat, src_feats, lvl_cams, hyp)
        volume = regularize_volume(
            volume,
            radius=cfg.get("depth", "regularizer_radius"),
            passes=cfg.get("depth", "regularizer_passes"),
        )
        prob = softmax_probability(volume, cfg.get("depth", "temperature"))
        depth_lvl = soft_argmin(prob, hyp)
        conf_lvl = probability_map(prob, depth_lvl, hyp, cfg.get("depth", "probability_window"))
        h, w = images[ref].shape
        depth_full = upsample_bilinear(depth_lvl, h, w, halvings)
        conf_full = upsample_bilinear(conf_lvl, h, w, halvings)
        write_pfm(out / f"depth_est_{ref:04d}.pfm", depth_full)
        write_pfm(out / f"prob_{ref:04d}.pfm", conf_full)
        log.info(
            "view %d: depth in [%.3f, %.3f], mean confidence %.3f",
            ref,
            float(depth_full.min()),
            float(depth_full.max()),
            float(conf_full.mean()),
        )
        print(f"wrote depth_est_{ref:04d}.pfm")
    return 0


def cmd_refine_nd(args) -> int:
    cfg = load_config(args.config)
    scene_dir = Path(args.scene)
    cams, scene_range = _read_cameras(scene_dir / "cameras.json")
    views = _parse_views(args.views, len(cams))
    out = _out_dir(args, scene_dir)
    d_min, d_max = _scene_depth_range(cfg, scene_range)
    for ref in views:
        depth = _read_view_depth(scene_dir, args.depth, ref)
        refined = refine_depth_nd(
            depth,
            cams[ref].intrinsics,
            _view_image(scene_dir, ref),
            alpha1=cfg.get("loss", "alpha1"),
            iterations=cfg.get("refine", "nd_passes"),
            d_min=d_min,
            d_max=d_max,
        )
        write_pfm(out / f"depth_nd_{ref:04d}.pfm", refined)
        print(f"wrote depth_nd_{ref:04d}.pfm")
    return 0


def _make_views(scene_dir, cams, indices, with_pyramids, fcfg):
    views = []
    for v in indices:
        img = _view_image(scene_dir, v)
        pyr = extract_pyramid(img, fcfg) if with_pyramids else None
        views.append(View(image=img, camera=cams[v], pyramid=pyr))
    return views


def cmd_refine_gd(args) -> int:
    cfg = load_config(args.config)
    scene_dir = Path(args.scene)
    cams, scene_range = _read_cameras(scene_dir / "cameras.json")
    views = _parse_views(args.views, len(cams))
    if len(views) < 2:
        raise CliError("refine-gd needs at least two views")
    out = _out_dir(args, scene_dir)
    d_min, d_max = _scene_depth_range(cfg, scene_range)
    weights = cfg.loss_weights()
    rcfg = RefineConfig(
        step=cfg.get("refine", "step"),
        max_iterations=cfg.get("refine", "max_iterations"),
        tolerance=cfg.get("refine", "tolerance"),
        d_min=d_min,
        d_max=d_max,
    )
    built = _make_views(scene_dir, cams, views, weights.gamma2 > 0.0, cfg.feature_config())
    for i, ref in enumerate(views):
        initial = _read_view_depth(scene_dir, args.depth, ref)
        others = [bv for j, bv in enumerate(built) if j != i]
        refined, trace = refine_depth_gd(initial, built[i], others, weights, rcfg)
        write_pfm(out / f"depth_gd_{ref:04d}.pfm", refined)
        log.info("view %d: %d accepted steps, loss %.6g", ref, len(trace) - 1, trace[-1])
        print(f"wrote depth_gd_{ref:04d}.pfm ({len(trace) - 1} steps)")
    return 0


def _breakdown_lines(bd) -> list[str]:
    s1, s2, s3 = bd.feature_per_scale
    return [
        f"photometric = {bd.photo!r}",
        f"ssim = {bd.ssim!r}",
        f"smoothness = {bd.smooth!r}",
        f"pixel = {bd.pixel!r}",
        f"feature_scale1 = {s1!r}",
        f"feature_scale2 = {s2!r}",
        f"feature_scale3 = {s3!r}",
        f"feature = {bd.feature!r}",
        f"total = {bd.total!r}",
        f"valid_pixels = {bd.valid_pixel_count}",
        f"total_pixels = {bd.total_pixel_count}",
    ]


def cmd_loss_report(args) -> int:
    cfg = load_config(args.config)
    scene_dir = Path(args.scene)
    cams, scene_range = _read_cameras(scene_dir / "cameras.json")
    views = _parse_views(args.views, len(cams))
    if len(views) < 2:
        raise CliError("loss-report needs at least two views")
    d_min, d_max = _scene_depth_range(cfg, scene_range)
    weights = cfg.loss_weights()
    built = _make_views(scene_dir, cams, views, weights.gamma2 > 0.0, cfg.feature_config())
    depth = _read_view_depth(scene_dir, args.depth, views[0])
    bd = total_loss(built[0], built[1:], depth, weights, (d_min, d_max))
    lines = _breakdown_lines(bd)
    for line in lines:
        print(line)
    if args.out is not None:
        out = _out_dir(args, Path(args.out))
        (out / "loss_report.txt").write_text("\n".join(lines) + "\n")
    return 0


def cmd_fuse(args) -> int:
    cfg = load_config(args.config)
    scene_dir = Path(args.scene)
    cams, _ = _read_cameras(scene_dir / "cameras.json")
    views = _parse_views(args.views, len(cams))
    if len(views) < 2:
        raise CliError("fuse needs at least two views")
    out = _out_dir(args, scene_dir)
    fusion_cfg = cfg.fusion_config()
    depths = []
    for v in views:
        depth = _read_view_depth(scene_dir, args.depth, v)
        prob_path = scene_dir / f"prob_{v:04d}.pfm"
        if prob_path.is_file():
            depth = filter_by_probability(
                depth, read_depth(prob_path), fusion_cfg.prob_threshold
            )
        depths.append(depth)
    sel_cams = [cams[v] for v in views]
    masks = geometric_consistency_filter(depths, sel_cams, fusion_cfg)
    images = [_view_image(scene_dir, v) for v in views]
    cloud = fuse_depth_maps(depths, masks, sel_cams, images, fusion_cfg)
    write_ply(out / "cloud.ply", cloud.points, cloud.colors)
    log.info("fused %d points from %d views", len(cloud), len(views))
    print(f"wrote cloud.ply ({len(cloud)} points)")
    return 0


def cmd_eval(args) -> int:
    scene_dir = Path(args.scene)
    cams, _ = _read_cameras(scene_dir / "cameras.json")
    views = _parse_views(args.views, len(cams))
    lines = []
    sums = {2.0: 0.0, 4.0: 0.0, 8.0: 0.0}
    for v in views:
        est = _read_view_depth(scene_dir, args.depth, v)
        gt = _read_view_depth(scene_dir, "depth_gt", v)
        pct = depth_error_percentages(est, gt, border=args.border)
        for t in sums:
            sums[t] += pct[t]
        lines.append(
            f"view {v}: %<2mm = {pct[2.0]:.6f}  %<4mm = {pct[4.0]:.6f}  "
            f"%<8mm = {pct[8.0]:.6f}"
        )
    n = len(views)
    lines.append(
        f"mean: %<2mm = {sums[2.0] / n:.6f}  %<4mm = {sums[4.0] / n:.6f}  "
        f"%<8mm = {sums[8.0] / n:.6f}"
    )
    if args.cloud is not None:
        pts, _colors = read_ply(args.cloud)
        if pts.shape[0] == 0:
            raise CliError(f"{args.cloud}: empty point cloud")
        gt_views = [
            RenderedView(image=np.zeros((1, 1)), depth=_read_view_depth(scene_dir, "depth_gt", v))
            for v in views
        ]
        reference = ground_truth_cloud(gt_views, [cams[v] for v in views])
        report = cloud_metrics(pts, reference)
        lines.append(
            f"cloud: accuracy = {report.accuracy!r}  completeness = "
            f"{report.completeness!r}  overall = {report.overall!r}"
        )
    for line in lines:
        print(line)
    if args.out is not None:
        out = _out_dir(args, Path(args.out))
        (out / "eval.txt").write_text("\n".join(lines) + "\n")
    return 0


def cmd_gradcheck(args) -> int:
    seed = 0 if args.seed is None else int(args.seed)
    ref_view, src_views, depth, weights = random_two_view_instance(seed)
    report = finite_difference_gradient(ref_view, src_views, depth, weights)
    print(f"samples = {len(report.samples)}")
    print(f"excluded = {len(report.excluded)}")
    print(f"max_rel_error = {report.max_rel_error!r}")
    print(f"mean_rel_error = {report.mean_rel_error!r}")
    if report.max_rel_error >= args.tol:
        print(f"error: max relative error {report.max_rel_error} >= {args.tol}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def _add_common(parser: argparse.ArgumentParser, scene_arg: bool) -> None:
    if scene_arg:
        parser.add_argument("scene", help="scene directory (from gen-scene)")
    parser.add_argument("--config", default=None, help="configuration file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    parser.add_argument("--seed", type=int, default=None, help="64-bit seed override")
    parser.add_argument(
        "--views", default=None, help="comma-separated view indices; first is the reference"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvskit",
        description="Multi-view stereo toolkit: synthetic scenes, plane-sweep "
        "depth, refinement, fusion and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scene", help="render a synthetic scene with ground truth")
    _add_common(p, scene_arg=False)
    p.set_defaults(func=cmd_gen_scene)

    p = sub.add_parser("depth", help="plane-sweep depth for the reference view")
    _add_common(p, scene_arg=True)
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("refine-nd", help="normal-guided depth refinement")
    _add_common(p, scene_arg=True)
    p.add_argument("--depth", default="depth_est", help="input depth prefix")
    p.set_defaults(func=cmd_refine_nd)

    p = sub.add_parser("refine-gd", help="gradient-descent depth refinement")
    _add_common(p, scene_arg=True)
    p.add_argument("--depth", default="depth_est", help="input depth prefix")
    p.set_defaults(func=cmd_refine_gd)

    p = sub.add_parser("loss-report", help="loss breakdown for a depth map")
    _add_common(p, scene_arg=True)
    p.add_argument("--depth", default="depth_gt", help="input depth prefix")
    p.set_defaults(func=cmd_loss_report)

    p = sub.add_parser("fuse", help="filter and fuse depth maps into a point cloud")
    _add_common(p, scene_arg=True)
    p.add_argument("--depth", default="depth_est", help="input depth prefix")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="depth error and cloud metrics against ground truth")
    _add_common(p, scene_arg=True)
    p.add_argument("--depth", default="depth_est", help="input depth prefix")
    p.add_argument("--border", type=int, default=0, help="crop N border pixels")
    p.add_argument("--cloud", default=None, help="PLY cloud to score against ground truth")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="verify analytic gradients on a random instance")
    _add_common(p, scene_arg=False)
    p.add_argument("--tol", type=float, default=1e-3, help="max relative error to accept")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    try:
        _configure_logging()
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise CliError("--threads must be >= 1")
        set_num_threads(args.threads)
        return args.func(args)
    except (ConfigError, SceneError, FormatError, CliError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
