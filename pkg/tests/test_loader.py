import json

import pytest

from src.config.loader import (
    AXES,
    TABLE_MU_H,
    apply_axis,
    apply_overrides,
    config_from_dict,
    config_hash,
    dump_config,
    load_config,
    load_preset,
    preset_names,
    resolve_config,
    table_config,
)
from src.models.stochastic import Mode
from src.utils.errors import ConfigError, ValidationError


class TestPresets:
    @pytest.mark.parametrize("name", ["baseline", "exponential"])
    def test_bundled_presets_are_valid(self, name):
        cfg = load_preset(name)
        assert cfg.validate() == []
        assert cfg.name == name

    def test_baseline_is_renormalised(self, baseline):
        assert abs(baseline.mmap.generator.sum(axis=1)).max() <= 1e-12
        assert baseline.S == 2
        assert baseline.mode is Mode.LUMPED

    def test_table_family(self):
        cfg = load_preset("table-ln0.1-mh0.5")
        assert cfg.lambda_n == pytest.approx(0.1, abs=1e-8)
        assert cfg.service_h.mean_rate == pytest.approx(0.5)
        assert cfg.service_n.mean_rate == pytest.approx(1.0)
        assert cfg.name == table_config(0.1, 0.5).name

    def test_names_include_table_grid(self):
        names = preset_names()
        assert "baseline" in names
        assert sum(name.startswith("table-") for name in names) == 6 * len(TABLE_MU_H)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            load_preset("no-such-preset")


class TestFiles:
    def test_dump_and_load_preserve_hash(self, tmp_path, baseline):
        path = dump_config(baseline, tmp_path / "cfg.json")
        reloaded = load_config(path)
        assert config_hash(reloaded) == config_hash(baseline)

    def test_hash_changes_with_content(self, baseline):
        assert config_hash(baseline) != config_hash(baseline.replace(S=3))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")

    def test_broken_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_section(self, baseline):
        data = baseline.to_dict()
        del data["retrial"]
        with pytest.raises(ConfigError, match="retrial"):
            config_from_dict(data)

    def test_non_integer_channels(self, baseline):
        data = json.loads(json.dumps(baseline.to_dict()))
        data["system"]["S"] = 2.5
        with pytest.raises(ConfigError):
            config_from_dict(data)


class TestOverrides:
    def test_rate_override_rescales(self, baseline):
        cfg = apply_overrides(baseline, ["mmap.lambda_h=0.3", "service_h.mu=2.0"])
        assert cfg.lambda_h == pytest.approx(0.3, abs=1e-8)
        assert cfg.service_h.mean_rate == pytest.approx(2.0)

    def test_raw_override_and_fixed_truncation(self, baseline):
        cfg = apply_overrides(baseline, ["system.S=4", "system.truncation.M=6"])
        assert cfg.S == 4
        assert cfg.truncation.is_fixed and cfg.truncation.M == 6

    def test_malformed_override(self, baseline):
        with pytest.raises(ConfigError):
            apply_overrides(baseline, ["system.S"])

    def test_unknown_section(self, baseline):
        with pytest.raises(ConfigError):
            apply_overrides(baseline, ["network.S=3"])

    @pytest.mark.parametrize("axis", AXES)
    def test_every_axis_is_applicable(self, baseline, axis):
        value = 3 if axis == "S" else 0.8
        assert apply_axis(baseline, axis, value).validate() == []

    def test_fractional_channel_axis(self, baseline):
        with pytest.raises(ValidationError):
            apply_axis(baseline, "S", 2.5)


class TestResolve:
    def test_exactly_one_source(self, tmp_path):
        with pytest.raises(ConfigError):
            resolve_config()
        with pytest.raises(ConfigError):
            resolve_config(config_path=tmp_path / "x.json", preset="baseline")

    def test_command_line_flags_win(self):
        cfg = resolve_config(preset="baseline", overrides=["system.truncation.M=3"],
                             mode="ordered", trunc_eps=1e-4, m_cap=12)
        assert cfg.mode is Mode.ORDERED
        assert not cfg.truncation.is_fixed
        assert (cfg.truncation.eps, cfg.truncation.m_cap) == (1e-4, 12)

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            resolve_config(preset="exponential", mode="sorted")
