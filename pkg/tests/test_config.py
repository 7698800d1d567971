"""Config schema tests: defaults, merging, dotted-path access, loading."""

import json

import pytest

from tunnelswarm.config import (
    ConfigError,
    apply_overrides,
    default_config,
    get_path,
    load_config,
    set_path,
)


class TestDefaults:
    def test_copy_is_independent(self):
        a = default_config()
        a["map"]["beta"] = 0.9
        assert default_config()["map"]["beta"] == 0.05

    def test_sections_present(self):
        cfg = default_config()
        for section in ("map", "controller", "sensing", "tunnel", "world",
                        "faulty", "assumptions"):
            assert isinstance(cfg[section], dict)


class TestApplyOverrides:
    def test_partial_merge_keeps_siblings(self):
        cfg = apply_overrides({"map": {"beta": 0.1}, "seed": 9})
        assert cfg["map"]["beta"] == 0.1
        assert cfg["map"]["omega_r"] == 0.9
        assert cfg["seed"] == 9

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="velocity"):
            apply_overrides({"velocity": 1.0})

    def test_unknown_nested_key_reports_dotted_path(self):
        with pytest.raises(ConfigError, match=r"map\.alpha"):
            apply_overrides({"map": {"alpha": 1.0}})

    def test_section_cannot_become_scalar(self):
        with pytest.raises(ConfigError, match="object"):
            apply_overrides({"map": 3})

    def test_empty_overrides_equal_defaults(self):
        assert apply_overrides({}) == default_config()


class TestDottedPaths:
    def test_set_and_get(self):
        cfg = default_config()
        set_path(cfg, "faulty.x", 60.0)
        assert cfg["faulty"]["x"] == 60.0
        assert get_path(cfg, "assumptions.v_cruise_cm_s") == 8.0

    def test_unresolvable_path(self):
        cfg = default_config()
        with pytest.raises(ConfigError, match="faulty.z"):
            set_path(cfg, "faulty.z", 1.0)
        with pytest.raises(ConfigError, match="nowhere"):
            get_path(cfg, "nowhere")

    def test_section_is_not_a_value(self):
        with pytest.raises(ConfigError, match="section"):
            set_path(default_config(), "map", 1.0)


class TestLoadConfig:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"mode": "acr", "faulty": {"theta_deg": 45.0}}))
        cfg = load_config(str(p))
        assert cfg["mode"] == "acr"
        assert cfg["faulty"]["theta_deg"] == 45.0
        assert cfg["tunnel"]["length"] == 300.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(str(tmp_path / "absent.json"))

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{mode:")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(str(p))

    def test_non_object_document(self, tmp_path):
        p = tmp_path / "list.json"
        p.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="JSON object"):
            load_config(str(p))
