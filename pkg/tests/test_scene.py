"""Synthetic scene rendering: textures, analytic depth, clouds, noise."""

import numpy as np
import pytest

from mvskit.camera import CameraIntrinsics, CameraModel, RigidTransform
from mvskit.scene import (
    CheckerTexture,
    FlatBorderTexture,
    ImageTexture,
    NoiseTexture,
    PlaneGeometry,
    SceneError,
    SceneSpec,
    SphereGeometry,
    ground_truth_cloud,
    lattice_hash,
    make_translation_rig,
    perturb_image,
    render_scene,
)


def _intr(width, height, f=96.0):
    return CameraIntrinsics(
        fx=f, fy=f, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        width=width, height=height,
    )


class TestLatticeHash:
    def test_pinned_generator_values(self):
        # The hash chain seeds a 64-bit linear congruential generator with
        # multiplier 6364136223846793005 and increment 1442695040888963407;
        # these values were replayed with pure-integer arithmetic.
        assert float(lattice_hash(np.int64(0), np.int64(0), 1)) == 0.3828633905082601
        assert (
            float(lattice_hash(np.int64(3), np.int64(-2), 42, salt=1))
            == 0.8259063112762722
        )
        assert (
            float(lattice_hash(np.int64(-1), np.int64(7), 2**31, salt=3))
            == 0.24546337728112633
        )

    def test_vectorized_matches_scalars(self):
        ix = np.array([0, 3, -1, 12])
        iy = np.array([0, -2, 7, -12])
        batch = lattice_hash(ix, iy, 9, salt=2)
        singles = [float(lattice_hash(x, y, 9, salt=2)) for x, y in zip(ix, iy)]
        assert batch.tolist() == singles

    def test_outputs_cover_unit_interval(self):
        g = np.arange(-50, 50)
        vals = lattice_hash(g[:, None], g[None, :], 7)
        assert float(vals.min()) >= 0.0
        assert float(vals.max()) < 1.0
        assert float(vals.std()) > 0.2  # roughly uniform, not degenerate


class TestTextures:
    def test_checker_cells_alternate(self):
        t = CheckerTexture(2.0)
        assert float(t.sample(np.float64(0.5), np.float64(0.5))) == 1.0
        assert float(t.sample(np.float64(2.5), np.float64(0.5))) == 0.0
        assert float(t.sample(np.float64(2.5), np.float64(2.5))) == 1.0
        assert float(t.sample(np.float64(2.0), np.float64(0.5))) == 0.0

    def test_checker_validation(self):
        with pytest.raises(ValueError):
            CheckerTexture(0.0)

    def test_noise_is_reproducible_and_seed_sensitive(self):
        u, v = np.meshgrid(np.linspace(0, 20, 16), np.linspace(0, 20, 12))
        a = NoiseTexture(3, octaves=3, cell=8.0).sample(u, v)
        b = NoiseTexture(3, octaves=3, cell=8.0).sample(u, v)
        c = NoiseTexture(4, octaves=3, cell=8.0).sample(u, v)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert float(a.min()) >= 0.0 and float(a.max()) < 1.0

    def test_noise_frozen_sample(self):
        t = NoiseTexture(5, octaves=3, cell=8.0)
        assert float(t.sample(np.array([3.25]), np.array([11.5]))[0]) == (
            0.3765738106535741
        )

    def test_noise_validation(self):
        with pytest.raises(ValueError):
            NoiseTexture(1, octaves=0)
        with pytest.raises(ValueError):
            NoiseTexture(1, cell=0.0)

    def test_flat_border_clamps_u_only(self):
        inner = NoiseTexture(1, octaves=2, cell=4.0)
        t = FlatBorderTexture(inner, 10.0, 30.0)
        v = np.array([2.0, 5.0, 9.0])
        left = t.sample(np.array([0.0, 3.0, 9.0]), v)
        at_edge = t.sample(np.full(3, 10.0), v)
        assert np.array_equal(left, at_edge)
        inside_u = np.array([15.0, 20.0, 25.0])
        assert np.array_equal(t.sample(inside_u, v), inner.sample(inside_u, v))

    def test_flat_border_validation(self):
        with pytest.raises(ValueError):
            FlatBorderTexture(NoiseTexture(1), 30.0, 10.0)

    def test_image_texture_bilinear_center(self):
        img = np.array([[0.0, 1.0], [1.0, 0.0]])
        t = ImageTexture(img)
        assert float(t.sample(np.float64(0.5), np.float64(0.5))) == pytest.approx(
            0.5, abs=1e-15
        )
        # clamped beyond borders
        assert float(t.sample(np.float64(-3.0), np.float64(0.0))) == 0.0
        assert float(t.sample(np.float64(5.0), np.float64(5.0))) == 0.0

    def test_image_texture_validation(self):
        with pytest.raises(ValueError):
            ImageTexture(np.zeros((1, 5)))


class TestRenderScene:
    def test_fronto_plane_depth_is_exactly_constant(self):
        intr = _intr(32, 24)
        cams = make_translation_rig(intr, 2, 50.0)
        spec = SceneSpec(
            geometry=PlaneGeometry((0.0, 0.0, 1.0), 600.0),
            texture=CheckerTexture(4.0),
            cameras=cams,
            width=32,
            height=24,
        )
        views = render_scene(spec)
        for view in views:
            assert np.all(view.depth == 600.0)

    def test_slanted_plane_matches_ray_marcher(self):
        # Rendered depth solves n.P = c in closed form; bisection along each
        # pixel ray is an independent oracle.
        n = np.array([0.2, -0.1, 1.0])
        n /= np.linalg.norm(n)
        c = 600.0 * n[2]
        intr = _intr(40, 30)
        cam = CameraModel(intrinsics=intr, world_to_camera=RigidTransform.identity())
        spec = SceneSpec(
            geometry=PlaneGeometry(n, c),
            texture=CheckerTexture(4.0),
            cameras=(cam,),
            width=40,
            height=30,
        )
        view = render_scene(spec)[0]
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = int(rng.integers(0, 40))
            y = int(rng.integers(0, 30))
            xn = (x - intr.cx) / intr.fx
            yn = (y - intr.cy) / intr.fy
            direction = np.array([xn, yn, 1.0])
            lo, hi = 1.0, 5000.0
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if n @ (mid * direction) - c > 0.0:
                    hi = mid
                else:
                    lo = mid
            assert view.depth[y, x] == pytest.approx(0.5 * (lo + hi), abs=1e-6)

    def test_view_zero_image_equals_texture_at_pixel_grid(self):
        intr = _intr(32, 24)
        cams = make_translation_rig(intr, 2, 50.0)
        tex = NoiseTexture(2, octaves=3, cell=8.0)
        spec = SceneSpec(
            geometry=PlaneGeometry((0.0, 0.0, 1.0), 600.0),
            texture=tex,
            cameras=cams,
            width=32,
            height=24,
        )
        views = render_scene(spec)
        xs, ys = np.meshgrid(np.arange(32, dtype=np.float64), np.arange(24, dtype=np.float64))
        assert np.allclose(views[0].image, tex.sample(xs, ys), atol=1e-12)

    def test_sphere_center_pixel_depth_exact(self):
        # Center pixel ray is the optical axis: depth hits the near surface
        # at center z minus radius, here exactly 500.
        intr = _intr(33, 25)
        cam = CameraModel(intrinsics=intr, world_to_camera=RigidTransform.identity())
        spec = SceneSpec(
            geometry=SphereGeometry((0.0, 0.0, 600.0), 100.0),
            texture=CheckerTexture(4.0),
            cameras=(cam,),
            width=33,
            height=25,
        )
        view = render_scene(spec)[0]
        assert view.depth[12, 16] == 500.0

    def test_sphere_misses_have_invalid_depth_and_black_image(self):
        intr = _intr(64, 48)
        cam = CameraModel(intrinsics=intr, world_to_camera=RigidTransform.identity())
        spec = SceneSpec(
            geometry=SphereGeometry((0.0, 0.0, 600.0), 60.0),
            texture=CheckerTexture(4.0),
            cameras=(cam,),
            width=64,
            height=48,
        )
        view = render_scene(spec)[0]
        missed = view.depth == 0.0
        assert missed.any() and (~missed).any()
        assert np.all(view.image[missed] == 0.0)

    def test_sphere_behind_camera_raises(self):
        intr = _intr(32, 24)
        cam = CameraModel(intrinsics=intr, world_to_camera=RigidTransform.identity())
        spec = SceneSpec(
            geometry=SphereGeometry((0.0, 0.0, -600.0), 100.0),
            texture=CheckerTexture(4.0),
            cameras=(cam,),
            width=32,
            height=24,
        )
        with pytest.raises(SceneError):
            render_scene(spec)

    def test_surface_outside_depth_range_raises(self):
        intr = _intr(32, 24)
        cam = CameraModel(intrinsics=intr, world_to_camera=RigidTransform.identity())
        spec = SceneSpec(
            geometry=PlaneGeometry((0.0, 0.0, 1.0), 2000.0),
            texture=CheckerTexture(4.0),
            cameras=(cam,),
            width=32,
            height=24,
        )
        with pytest.raises(SceneError):
            render_scene(spec)

    def test_spec_validation(self):
        intr = _intr(32, 24)
        cam = CameraModel(intrinsics=intr, world_to_camera=RigidTransform.identity())
        plane = PlaneGeometry((0.0, 0.0, 1.0), 600.0)
        tex = CheckerTexture(4.0)
        with pytest.raises(SceneError):
            SceneSpec(geometry=plane, texture=tex, cameras=(), width=32, height=24)
        with pytest.raises(SceneError):
            SceneSpec(geometry=plane, texture=tex, cameras=(cam,), width=64, height=48)
        with pytest.raises(SceneError):
            SceneSpec(
                geometry=plane, texture=tex, cameras=(cam,), width=32, height=24,
                d_min=900.0, d_max=500.0,
            )
        with pytest.raises(ValueError):
            PlaneGeometry((0.0, 0.0, 0.0), 600.0)
        with pytest.raises(ValueError):
            SphereGeometry((0.0, 0.0, 600.0), -1.0)


class TestRigAndCloud:
    def test_translation_rig_centers(self):
        intr = _intr(32, 24)
        cams = make_translation_rig(intr, 3, 50.0)
        for i, cam in enumerate(cams):
            assert np.allclose(cam.center(), [50.0 * i, 0.0, 0.0], atol=1e-12)
        with pytest.raises(ValueError):
            make_translation_rig(intr, 0, 50.0)

    def test_cloud_from_fronto_plane_is_exact(self):
        intr = _intr(16, 12)
        cams = make_translation_rig(intr, 1, 50.0)
        spec = SceneSpec(
            geometry=PlaneGeometry((0.0, 0.0, 1.0), 600.0),
            texture=CheckerTexture(4.0),
            cameras=cams,
            width=16,
            height=12,
        )
        views = render_scene(spec)
        cloud = ground_truth_cloud(views, cams, stride=1)
        assert cloud.shape == (16 * 12, 3)
        assert np.all(cloud[:, 2] == 600.0)
        assert float(np.abs(cloud[:, 0]).max()) == pytest.approx(
            600.0 * (7.5 / 96.0), abs=1e-9
        )

    def test_cloud_stride_and_multi_view_counts(self):
        intr = _intr(16, 12)
        cams = make_translation_rig(intr, 2, 50.0)
        spec = SceneSpec(
            geometry=PlaneGeometry((0.0, 0.0, 1.0), 600.0),
            texture=CheckerTexture(4.0),
            cameras=cams,
            width=16,
            height=12,
        )
        views = render_scene(spec)
        assert ground_truth_cloud(views, cams, stride=1).shape[0] == 2 * 16 * 12
        assert ground_truth_cloud(views, cams, stride=2).shape[0] == 2 * 8 * 6

    def test_cloud_skips_invalid_depths(self):
        intr = _intr(16, 12)
        cams = make_translation_rig(intr, 1, 50.0)
        spec = SceneSpec(
            geometry=PlaneGeometry((0.0, 0.0, 1.0), 600.0),
            texture=CheckerTexture(4.0),
            cameras=cams,
            width=16,
            height=12,
        )
        views = render_scene(spec)
        views[0].depth[0, 0] = 0.0
        assert ground_truth_cloud(views, cams).shape[0] == 16 * 12 - 1

    def test_empty_cloud_shape(self):
        assert ground_truth_cloud([], []).shape == (0, 3)


class TestPerturbImage:
    def test_zero_sigma_copies(self):
        img = np.linspace(0.0, 1.0, 12).reshape(3, 4)
        out = perturb_image(img, 0.0, np.random.default_rng(0))
        assert np.array_equal(out, img)
        assert out is not img

    def test_noise_is_clipped_and_seeded(self):
        img = np.full((20, 20), 0.5)
        a = perturb_image(img, 10.0, np.random.default_rng(3))
        b = perturb_image(img, 10.0, np.random.default_rng(3))
        assert np.array_equal(a, b)
        assert float(a.min()) == 0.0 and float(a.max()) == 1.0
        assert np.all((a >= 0.0) & (a <= 1.0))
        assert np.array_equal(img, np.full((20, 20), 0.5))  # input untouched

    def test_negative_sigma_raises(self):
        with pytest.raises(ValueError):
            perturb_image(np.zeros((2, 2)), -0.1, np.random.default_rng(0))
