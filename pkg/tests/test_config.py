"""Configuration parsing: closed schema, defaults, effective-config dump."""

import pytest

from mvskit.config import Config, ConfigError, default_config, load_config


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestDefaults:
    def test_depth_sampling_defaults(self):
        cfg = default_config()
        assert cfg.get("depth", "d_min") == 425.0
        assert cfg.get("depth", "d_max") == 935.0
        assert cfg.get("depth", "count") == 192
        hyp = cfg.hypotheses()
        assert hyp.d_min == 425.0 and hyp.d_max == 935.0 and hyp.count == 192

    def test_loss_weight_defaults(self):
        w = default_config().loss_weights()
        assert (w.gamma1, w.gamma2) == (1.0, 1.0)
        assert (w.lambda1, w.lambda2, w.lambda3) == (0.8, 0.2, 0.067)
        assert (w.beta1, w.beta2, w.beta3) == (0.2, 0.8, 0.4)
        assert (w.alpha2, w.alpha3) == (0.5, 0.5)
        assert default_config().get("loss", "alpha1") == 0.1

    def test_fusion_defaults(self):
        f = default_config().fusion_config()
        assert f.prob_threshold == 0.6
        assert f.pixel_threshold == 1.0
        assert f.rel_depth_threshold == 0.01
        assert f.min_consistent_views == 2

    def test_refine_bundle_shares_depth_range(self):
        cfg = default_config()
        cfg.set_value("depth", "d_min", 500.0)
        r = cfg.refine_config()
        assert r.d_min == 500.0 and r.d_max == 935.0
        assert r.step == 8.0 and r.max_iterations == 200

    def test_nothing_is_provided_by_default(self):
        cfg = default_config()
        assert not cfg.is_provided("depth", "count")
        assert not cfg.is_provided("scene", "width")


class TestLoadConfig:
    def test_none_gives_defaults(self):
        cfg = load_config(None)
        assert cfg.get("scene", "width") == 64
        assert not cfg.is_provided("scene", "width")

    def test_values_are_parsed_and_marked_provided(self, tmp_path):
        p = _write(
            tmp_path,
            "[scene]\nwidth = 128\nplane_normal = 0 0 1\ngeometry = plane\n"
            "[depth]\ncount = 32\ntemperature = 5e-4\n",
        )
        cfg = load_config(p)
        assert cfg.get("scene", "width") == 128
        assert cfg.get("scene", "plane_normal") == (0.0, 0.0, 1.0)
        assert cfg.get("depth", "count") == 32
        assert cfg.get("depth", "temperature") == 5e-4
        assert cfg.is_provided("depth", "count")
        assert not cfg.is_provided("depth", "d_min")

    def test_unknown_key_is_a_hard_error_naming_file_and_key(self, tmp_path):
        p = _write(tmp_path, "[depth]\ncout = 32\n")
        with pytest.raises(ConfigError) as err:
            load_config(p)
        message = str(err.value)
        assert "cout" in message
        assert str(p) in message

    def test_unknown_section_is_a_hard_error(self, tmp_path):
        p = _write(tmp_path, "[depths]\ncount = 32\n")
        with pytest.raises(ConfigError) as err:
            load_config(p)
        assert "depths" in str(err.value)

    def test_bad_value_names_section_and_key(self, tmp_path):
        p = _write(tmp_path, "[depth]\ncount = many\n")
        with pytest.raises(ConfigError) as err:
            load_config(p)
        assert "count" in str(err.value)

    def test_choice_fields_are_validated(self, tmp_path):
        p = _write(tmp_path, "[scene]\ntexture = marble\n")
        with pytest.raises(ConfigError) as err:
            load_config(p)
        assert "marble" in str(err.value)

    def test_vector_fields_accept_commas(self, tmp_path):
        p = _write(tmp_path, "[scene]\nplane_normal = 0.0, 0.5, 1.0\n")
        assert load_config(p).get("scene", "plane_normal") == (0.0, 0.5, 1.0)

    def test_vector_needs_three_components(self, tmp_path):
        p = _write(tmp_path, "[scene]\nplane_normal = 1 2\n")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.cfg")

    def test_inline_comments_are_stripped(self, tmp_path):
        p = _write(tmp_path, "[depth]\ncount = 32  # coarse sweep\n")
        assert load_config(p).get("depth", "count") == 32


class TestEffectiveDump:
    def test_substituted_marks_defaulted_engineering_values_only(self, tmp_path):
        p = _write(tmp_path, "[depth]\ntemperature = 0.001\n")
        cfg = load_config(p)
        dump = cfg.dump_effective()
        lines = {
            line.split(" = ")[0].strip(): line
            for line in dump.splitlines()
            if " = " in line
        }
        # provided: no marker even though it is an engineering value
        assert "substituted" not in lines["temperature"]
        # defaulted engineering value: marked
        assert lines["regularizer_radius"].endswith("# substituted")
        # defaulted published constant: unmarked
        assert "substituted" not in lines["count"]
        assert "substituted" not in lines["lambda1"]

    def test_dump_reparses_to_the_same_values(self, tmp_path):
        p = _write(tmp_path, "[scene]\nwidth = 80\n[loss]\nlambda1 = 0.7\n")
        cfg = load_config(p)
        q = tmp_path / "eff.cfg"
        q.write_text(cfg.dump_effective())
        cfg2 = load_config(q)
        for section_key, value in cfg._values.items():
            assert cfg2[section_key] == value

    def test_dump_contains_every_schema_key(self):
        dump = default_config().dump_effective()
        for needle in (
            "[scene]", "[depth]", "[loss]", "[refine]", "[fusion]",
            "geometry = plane", "count = 192", "prob_threshold = 0.6",
        ):
            assert needle in dump


class TestSetValue:
    def test_set_value_marks_provided(self):
        cfg = default_config()
        cfg.set_value("fusion", "min_consistent_views", 1)
        assert cfg.get("fusion", "min_consistent_views") == 1
        assert cfg.is_provided("fusion", "min_consistent_views")
        assert "min_consistent_views = 1  # substituted" not in cfg.dump_effective()

    def test_set_value_rejects_unknown_keys(self):
        with pytest.raises(ConfigError):
            default_config().set_value("depth", "nope", 3)
