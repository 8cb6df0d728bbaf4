"""Config loading, validation and seed derivation."""

import pytest

from flakesynth.core.config import (
    OXIDE_PRESETS,
    PipelineConfig,
    SceneSettings,
    default_config_path,
    load_config,
)
from flakesynth.core.errors import ConfigError
from flakesynth.core.rng import derive_rng, derive_seed


def write_config(tmp_path, text):
    path = tmp_path / "config.toml"
    path.write_text(text, encoding="utf-8")
    return path


class TestDefaults:
    def test_in_code_defaults(self, pipeline_config):
        assert pipeline_config.seed == 0
        assert pipeline_config.preprocess.knn_k == 10
        assert pipeline_config.preprocess.dbscan_eps == 0.1
        assert pipeline_config.preprocess.dbscan_min_pts == 10
        assert pipeline_config.amm.leaky_slope == 0.01
        assert pipeline_config.train.rejection_quantile == 0.001
        assert pipeline_config.detector.min_area == 200
        assert pipeline_config.evaluation.iou_threshold == 0.5

    def test_bundled_file_spells_out_defaults(self):
        bundled = load_config(default_config_path())
        assert bundled.echo() == PipelineConfig().echo()

    def test_oxide_presets(self):
        assert OXIDE_PRESETS["low"] == (85.0, 95.0)
        assert SceneSettings(oxide_thickness_nm="high").oxide_range() == (70.0, 110.0)
        assert SceneSettings(oxide_thickness_nm=(88.0, 92.0)).oxide_range() == (88.0, 92.0)

    def test_annotated_classes_from_material(self, pipeline_config):
        assert pipeline_config.annotated_classes() == pipeline_config.material("graphene").annotated_classes


class TestLoading:
    def test_overrides(self, tmp_path):
        config = load_config(write_config(tmp_path, "seed = 3\n[scene]\nimage_width = 64\n"), seed=11)
        assert config.seed == 11
        assert config.scene.image_width == 64
        assert config.base_dir == str(tmp_path.resolve())

    def test_none_override_ignored(self, tmp_path):
        assert load_config(write_config(tmp_path, "seed = 3\n"), seed=None).seed == 3

    def test_unknown_key_named(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            load_config(write_config(tmp_path, "[scene]\nbogus_key = 1\n"))
        assert info.value.key == "scene.bogus_key"
        assert "config.toml" in str(info.value)

    def test_inverted_range(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            load_config(write_config(tmp_path, "[scene]\nscale = [2.0, 1.0]\n"))
        assert info.value.key == "scene.scale"

    def test_shape_count_bounds(self, tmp_path):
        with pytest.raises(ConfigError, match="shape_count"):
            load_config(write_config(tmp_path, "[scene]\nshape_count = [1, 501]\n"))

    def test_layer_weights_length(self):
        with pytest.raises(ValueError):
            SceneSettings(layer_counts=(1, 3), layer_weights=[1.0, 1.0])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.toml")

    def test_invalid_toml(self, tmp_path):
        with pytest.raises(ConfigError, match="invalid TOML"):
            load_config(write_config(tmp_path, "[scene\n"))

    def test_unknown_material(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, '[scene]\nmaterial = "unobtainium"\n'))

    def test_missing_data_file(self, tmp_path):
        text = '[materials.custom]\ndispersion = "nowhere.txt"\nlayer_thickness_nm = 0.5\nannotated_classes = 2\n'
        with pytest.raises(ConfigError) as info:
            load_config(write_config(tmp_path, text))
        assert info.value.key == "nowhere.txt"

    def test_extra_material_merged(self, tmp_path):
        text = '[materials.custom]\ndispersion = "graphene.txt"\nlayer_thickness_nm = 0.5\nannotated_classes = 2\n'
        config = load_config(write_config(tmp_path, text))
        assert "graphene" in config.materials
        assert config.material("custom").annotated_classes == 2

    def test_environment_ignored(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SEED", "99")
        monkeypatch.setenv("LOG_LEVEL", "DEBUG")
        config = load_config()
        assert config.seed == 0
        assert config.app.log_level == "INFO"


class TestSeeds:
    def test_stable(self):
        assert derive_seed(7, "scene", 3) == derive_seed(7, "scene", 3)

    def test_distinct_streams(self):
        seeds = {derive_seed(7, tag, index) for tag in ("scene", "post", "subset") for index in range(50)}
        assert len(seeds) == 150

    def test_rng_reproducible(self):
        assert derive_rng(1, "x").random(5).tolist() == derive_rng(1, "x").random(5).tolist()
