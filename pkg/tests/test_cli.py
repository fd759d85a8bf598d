"""End-to-end command-line behavior on a small rendered scene."""

import json

import numpy as np
import pytest

from mvskit.cli import main
from mvskit.formats import read_depth, read_ply

SCENE_CFG = """\
[scene]
width = 32
height = 24
views = 2
baseline = 50.49731182795699
plane_offset = 605.9677419354839

[depth]
count = 32
temperature = 0.0005

[refine]
max_iterations = 3
"""

FLAT_CFG = """\
[scene]
width = 128
height = 96
views = 2
baseline = 50.0
plane_offset = 600.0
texture_margin = 40.0
"""


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("scene")
    cfg = root / "run.cfg"
    cfg.write_text(SCENE_CFG)
    out = root / "s"
    assert main(["gen-scene", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["depth", str(out), "--config", str(cfg)]) == 0
    return out, cfg


@pytest.fixture(scope="module")
def flat_scene_dir(tmp_path_factory):
    # Texture constant along x near the frame edges: at ground truth every
    # border convention matches the true off-frame content, so losses at the
    # exact depth vanish even after float32 file storage.
    root = tmp_path_factory.mktemp("flat_scene")
    cfg = root / "run.cfg"
    cfg.write_text(FLAT_CFG)
    out = root / "s"
    assert main(["gen-scene", "--config", str(cfg), "--out", str(out)]) == 0
    return out, cfg


class TestGenScene:
    def test_writes_the_full_scene_layout(self, scene_dir, capsys):
        out, cfg = scene_dir
        for name in (
            "cameras.json",
            "effective.cfg",
            "view_0000.pfm",
            "view_0000.ppm",
            "view_0001.pfm",
            "depth_gt_0000.pfm",
            "depth_gt_0001.pfm",
        ):
            assert (out / name).is_file(), name
        payload = json.loads((out / "cameras.json").read_text())
        assert len(payload["views"]) == 2
        assert payload["depth_range"] == [425.0, 935.0]
        gt = read_depth(out / "depth_gt_0000.pfm")
        assert gt.shape == (24, 32)
        assert np.all(np.abs(gt - 605.9677419354839) < 1e-4)  # float32 storage

    def test_requires_out_directory(self, capsys):
        assert main(["gen-scene"]) == 1
        assert "--out" in capsys.readouterr().err

    def test_unknown_config_key_names_file_and_key(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[depth]\ncout = 32\n")
        assert main(["gen-scene", "--config", str(bad), "--out", str(tmp_path / "s")]) == 1
        err = capsys.readouterr().err
        assert "cout" in err and str(bad) in err

    def test_missing_config_file_fails_with_its_name(self, tmp_path, capsys):
        missing = tmp_path / "absent.cfg"
        assert main(["gen-scene", "--config", str(missing), "--out", str(tmp_path / "s")]) == 1
        assert str(missing) in capsys.readouterr().err

    def test_seed_flag_changes_texture_and_effective_config(self, tmp_path, capsys):
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert main(["gen-scene", "--out", str(a), "--seed", "1"]) == 0
        assert main(["gen-scene", "--out", str(b), "--seed", "2"]) == 0
        ia = read_depth(a / "view_0000.pfm")
        ib = read_depth(b / "view_0000.pfm")
        assert not np.array_equal(ia, ib)
        assert "noise_seed = 2" in (b / "effective.cfg").read_text()

    def test_effective_config_marks_substituted_defaults(self, scene_dir):
        out, cfg = scene_dir
        text = (out / "effective.cfg").read_text()
        assert "width = 32" in text
        assert not any(
            line.startswith("width") and "substituted" in line
            for line in text.splitlines()
        )
        assert any(
            line.startswith("noise_cell") and line.endswith("# substituted")
            for line in text.splitlines()
        )


class TestDepth:
    def test_writes_depth_and_probability_per_view(self, scene_dir):
        out, cfg = scene_dir
        for name in (
            "depth_est_0000.pfm",
            "depth_est_0001.pfm",
            "prob_0000.pfm",
            "prob_0001.pfm",
        ):
            assert (out / name).is_file(), name
        est = read_depth(out / "depth_est_0000.pfm")
        assert est.shape == (24, 32)
        assert np.all((est >= 425.0) & (est <= 935.0))
        prob = read_depth(out / "prob_0000.pfm")
        assert np.all((prob >= 0.0) & (prob <= 1.0))

    def test_missing_scene_directory_fails(self, tmp_path, capsys):
        assert main(["depth", str(tmp_path / "nowhere")]) == 1
        assert "cameras.json" in capsys.readouterr().err

    def test_single_view_selection_fails(self, scene_dir, capsys):
        out, cfg = scene_dir
        assert main(["depth", str(out), "--views", "0"]) == 1
        assert "two views" in capsys.readouterr().err

    @pytest.mark.parametrize("views", ["0,0", "0,7", "x,1", ""])
    def test_bad_view_lists_fail(self, scene_dir, views, capsys):
        out, cfg = scene_dir
        assert main(["depth", str(out), "--views", views]) == 1
        assert "--views" in capsys.readouterr().err or "view" in capsys.readouterr().err


class TestRefine:
    def test_normal_refinement_writes_output(self, scene_dir, capsys):
        out, cfg = scene_dir
        code = main(["refine-nd", str(out), "--config", str(cfg), "--depth", "depth_gt"])
        assert code == 0
        nd = read_depth(out / "depth_nd_0000.pfm")
        gt = read_depth(out / "depth_gt_0000.pfm")
        # the exact plane is a fixed point apart from storage rounding
        assert float(np.abs(nd[2:-2, 2:-2] - gt[2:-2, 2:-2]).max()) < 1e-3

    def test_gradient_refinement_writes_output_and_reports_steps(self, scene_dir, capsys):
        out, cfg = scene_dir
        code = main(["refine-gd", str(out), "--config", str(cfg)])
        assert code == 0
        got = capsys.readouterr().out
        assert "depth_gd_0000.pfm" in got and "steps" in got
        gd = read_depth(out / "depth_gd_0000.pfm")
        assert gd.shape == (24, 32)
        assert np.all((gd >= 425.0) & (gd <= 935.0))

    def test_missing_depth_prefix_fails_with_path(self, scene_dir, capsys):
        out, cfg = scene_dir
        assert main(["refine-nd", str(out), "--depth", "depth_zz"]) == 1
        assert "depth_zz_0000.pfm" in capsys.readouterr().err


class TestLossReport:
    def test_ground_truth_total_is_tiny_on_noiseless_scene(self, flat_scene_dir, capsys):
        out, cfg = flat_scene_dir
        assert main(["loss-report", str(out), "--config", str(cfg)]) == 0
        lines = capsys.readouterr().out.splitlines()
        values = dict(line.split(" = ") for line in lines)
        assert float(values["total"]) < 1e-3
        assert float(values["photometric"]) < 1e-3
        assert int(values["valid_pixels"]) > 0
        recombined = float(values["pixel"]) + float(values["feature"])
        assert abs(recombined - float(values["total"])) < 1e-9

    def test_report_file_matches_stdout(self, flat_scene_dir, tmp_path, capsys):
        out, cfg = flat_scene_dir
        code = main([
            "loss-report", str(out), "--config", str(cfg), "--out", str(tmp_path),
        ])
        assert code == 0
        stdout = capsys.readouterr().out
        assert (tmp_path / "loss_report.txt").read_text() == stdout


class TestFuseAndEval:
    def test_fuse_writes_readable_cloud(self, scene_dir, capsys):
        out, cfg = scene_dir
        assert main(["fuse", str(out), "--config", str(cfg), "--depth", "depth_gt"]) == 0
        pts, cols = read_ply(out / "cloud.ply")
        assert pts.shape[0] > 0
        assert cols is not None and cols.shape == pts.shape
        assert "cloud.ply" in capsys.readouterr().out

    def test_eval_reports_per_view_and_mean(self, scene_dir, tmp_path, capsys):
        out, cfg = scene_dir
        code = main([
            "eval", str(out), "--depth", "depth_gt", "--border", "2",
            "--cloud", str(out / "cloud.ply"), "--out", str(tmp_path),
        ])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "view 0:" in stdout and "view 1:" in stdout
        mean_line = [l for l in stdout.splitlines() if l.startswith("mean:")][0]
        assert "%<2mm = 100.000000" in mean_line
        assert "cloud: accuracy" in stdout
        assert (tmp_path / "eval.txt").read_text() == stdout

    def test_eval_missing_estimate_fails(self, scene_dir, tmp_path, capsys):
        out, cfg = scene_dir
        assert main(["eval", str(out), "--depth", "depth_none"]) == 1
        assert "depth_none_0000.pfm" in capsys.readouterr().err


class TestGradcheckAndGlobals:
    def test_gradcheck_passes_at_default_tolerance(self, capsys):
        assert main(["gradcheck", "--seed", "3"]) == 0
        outp = capsys.readouterr().out
        values = dict(line.split(" = ") for line in outp.splitlines())
        assert float(values["max_rel_error"]) < 1e-3
        assert int(values["samples"]) == 64

    def test_gradcheck_fails_when_tolerance_is_impossible(self, capsys):
        assert main(["gradcheck", "--seed", "3", "--tol", "1e-15"]) == 1
        assert "max relative error" in capsys.readouterr().err

    def test_thread_count_must_be_positive(self, capsys):
        assert main(["gradcheck", "--threads", "0"]) == 1
        assert "--threads" in capsys.readouterr().err

    def test_log_level_env_is_validated(self, monkeypatch, capsys):
        monkeypatch.setenv("MVSKIT_LOG", "verbose")
        assert main(["gradcheck"]) == 1
        assert "MVSKIT_LOG" in capsys.readouterr().err

    def test_info_log_level_is_accepted(self, monkeypatch):
        monkeypatch.setenv("MVSKIT_LOG", "info")
        assert main(["gradcheck", "--seed", "3"]) == 0
