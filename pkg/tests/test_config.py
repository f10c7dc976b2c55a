"""Test flat config files and environment settings."""

from pathlib import Path

import pytest

from app.config import build_experiment_config, get_settings, load_experiment_config, parse_config_text
from app.config.settings import Precision, Settings
from app.models.training import MethodArm, SplitMode
from app.utils.exceptions import ConfigError

CONFIG_DIR = Path(__file__).resolve().parents[1] / "data" / "configs"


class TestConfigFile:
    def test_flat_keys_reach_nested_blocks(self):
        values = parse_config_text(
            "split_mode = open\nmethod = transformer_ema\nalpha_sl = 0.5\n"
            "conv_channels = 8, 16\nimage_side = 16  # small\nnum_heads = 2\nembed_dim = 16\n"
        )
        config = build_experiment_config(values)
        assert config.split_mode == SplitMode.OPEN
        assert config.method == MethodArm.TRANSFORMER_EMA
        assert config.adapt.loss.alpha_sl == 0.5
        assert config.adapt.backbone.conv_channels == [8, 16]
        assert config.adapt.transformer.embed_dim == 16
        assert config.adapt.transformer.mlp_hidden == 64

    def test_comments_and_blank_lines(self):
        assert parse_config_text("# header\n\nseed = 3\n") == {"seed": "3"}

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config key 'learning_rate'"):
            parse_config_text("learning_rate = 0.1")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("seed = 1\nseed = 2")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match=":1:"):
            parse_config_text("seed 1")

    def test_error_line_counts_leading_blank_lines(self):
        with pytest.raises(ConfigError, match="run.cfg:3:"):
            parse_config_text("\n\nseed 1\n", source="run.cfg")

    def test_quoted_values_and_inline_comments(self):
        values = parse_config_text('dataset_path = "data/a b.tdds"\nseed = 4  # fixed\n')
        assert values == {"dataset_path": "data/a b.tdds", "seed": "4"}

    def test_no_variable_interpolation(self, monkeypatch):
        monkeypatch.setenv("RUN_ROOT", "/elsewhere")
        assert parse_config_text("output_dir = ${RUN_ROOT}/x") == {"output_dir": "${RUN_ROOT}/x"}

    def test_invalid_value(self):
        with pytest.raises(ConfigError):
            build_experiment_config({"batch_size": "1"})

    def test_incompatible_heads(self):
        with pytest.raises(ConfigError):
            build_experiment_config({"embed_dim": "10", "num_heads": "4"})

    def test_overrides_apply_on_top_of_a_base(self):
        base = build_experiment_config({"target_epochs": "3"})
        config = build_experiment_config({"seed": 9}, base)
        assert config.adapt.target_epochs == 3
        assert config.adapt.seed == 9

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_experiment_config(tmp_path / "absent.cfg")

    @pytest.mark.parametrize("name", ["desk_default.cfg", "tiny.cfg"])
    def test_shipped_configs_load(self, name):
        config = load_experiment_config(CONFIG_DIR / name)
        assert config.adapt.backbone.image_side % 2 ** len(config.adapt.backbone.conv_channels) == 0


class TestSettings:
    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("THREADS", raising=False)
        settings = Settings()
        assert settings.runtime.effective_threads == 1
        assert settings.runtime.precision == Precision.FLOAT32

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("THREADS", "4")
        monkeypatch.setenv("PRECISION", "float64")
        monkeypatch.setenv("LOG_LEVEL", "debug")
        settings = get_settings()
        assert settings.runtime.effective_threads == 4
        assert settings.runtime.precision == Precision.FLOAT64
        assert settings.observability.log_level == "DEBUG"

    def test_invalid_log_level(self, monkeypatch):
        monkeypatch.setenv("LOG_LEVEL", "chatty")
        with pytest.raises(ValueError):
            Settings()

    def test_cached_until_reset(self):
        assert get_settings() is get_settings()
