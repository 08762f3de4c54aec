"""Tests for experiment configuration loading, overrides and validation."""

import json
from pathlib import Path

import pytest
import yaml

from wimo.core.config import (
    CONFIG_SCHEMA,
    Config,
    ConfigError,
    apply_overrides,
    help_epilog,
    json_schema,
)


class TestDefaults:
    def test_default_scenario(self):
        spec = Config.load().spec
        assert [s.theta for s in spec.sources] == [15.0, 25.0]
        assert spec.fs == 10000.0
        assert spec.snapshots == 8192
        assert spec.estimator.method == "1-wimo"
        assert spec.estimator.m == 6
        assert spec.geometry().n_sensors == 8
        assert spec.assumed_band() == (1500.0, 4500.0)

    def test_half_wavelength_spacing_from_sources(self):
        geometry = Config.load().spec.geometry()
        assert geometry.positions[1, 2] == pytest.approx(1500.0 / 9000.0)

    def test_theta_grid(self):
        grid = Config.load().spec.theta_grid()
        assert grid[0] == -90.0 and grid[-1] == 90.0 and len(grid) == 181

    def test_template_parses(self, tmp_path):
        path = tmp_path / "wimo.yaml"
        path.write_text(Config.generate_template())
        spec = Config.load(path).spec
        assert spec.estimator.p_mode == "manual"
        assert spec.estimator.p == 15


class TestLoading:
    def test_yaml_file(self, tmp_path, small_raw):
        path = tmp_path / "exp.yaml"
        path.write_text(yaml.safe_dump(small_raw))
        spec = Config.load(path).spec
        assert spec.trials == 4
        assert spec.theta_grid()[0] == -60.0

    def test_json_file(self, tmp_path, small_raw):
        path = tmp_path / "exp.json"
        path.write_text(json.dumps(small_raw))
        assert Config.load(path).spec.trials == 4

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            Config.load(tmp_path / "nope.yaml")

    def test_shipped_configs_load(self):
        configs = Path(__file__).resolve().parents[2] / "configs"
        for path in sorted(configs.glob("*.yaml")):
            Config.load(path)


class TestValidation:
    def test_unknown_nested_key(self, small_raw):
        small_raw["sources"][1]["psd"]["bw3d"] = 100.0
        with pytest.raises(ConfigError, match=r"Unknown config key 'sources\[1\]\.psd\.bw3d'"):
            Config(small_raw)

    def test_wrong_type(self, small_raw):
        small_raw["estimator"]["m"] = "six"
        with pytest.raises(ConfigError, match="estimator.m: expected an integer"):
            Config(small_raw)

    def test_out_of_range(self, small_raw):
        small_raw["sampling"]["fs"] = 0.0
        with pytest.raises(ConfigError, match=r"sampling.fs: must be in \(0"):
            Config(small_raw)

    def test_bad_choice(self, small_raw):
        small_raw["estimator"]["method"] = "esprit"
        with pytest.raises(ConfigError, match="must be one of"):
            Config(small_raw)

    def test_nyquist(self, small_raw):
        small_raw["sources"][0]["psd"]["f_h"] = 6000.0
        with pytest.raises(ConfigError, match=r"sources\[0\]\.psd"):
            Config(small_raw)

    def test_manual_order_needs_p(self, small_raw):
        small_raw["estimator"]["p_mode"] = "manual"
        with pytest.raises(ConfigError, match="estimator.p: required"):
            Config(small_raw)

    def test_snapshots_at_least_m(self, small_raw):
        small_raw["sampling"]["snapshots"] = 3
        with pytest.raises(ConfigError, match="need M >= estimator.m"):
            Config(small_raw)

    def test_custom_array_needs_positions(self, small_raw):
        small_raw["array"] = {"type": "custom"}
        with pytest.raises(ConfigError, match="array.positions: required"):
            Config(small_raw)

    def test_sweep_needs_values(self, small_raw):
        small_raw["sweep"] = {"axis": "snr"}
        with pytest.raises(ConfigError, match="sweep.values: required"):
            Config(small_raw)

    def test_separation_sweep_needs_two_sources(self, small_raw):
        small_raw["sources"] = small_raw["sources"][:1]
        small_raw["sweep"] = {"axis": "separation", "values": [5.0]}
        with pytest.raises(ConfigError, match="at least two sources"):
            Config(small_raw)

    def test_separation_sweep_stays_inside_90_degrees(self, small_raw):
        small_raw["sweep"] = {"axis": "separation", "values": [4.0, 170.0]}
        with pytest.raises(ConfigError, match="separation 170.0 about 20.0 deg puts a source beyond 90"):
            Config(small_raw)
        small_raw["sweep"] = {"axis": "separation", "values": [140.0], "center_deg": 0.0}
        assert Config(small_raw).spec.sweep.values == (140.0,)

    def test_source_on_grid_edge_warns(self, small_raw, caplog):
        small_raw["sources"][1]["theta"] = 60.0
        with caplog.at_level("WARNING", logger="wimo.config"):
            Config(small_raw)
        assert "sources[1].theta=60 deg is not inside the grid (-60, 60)" in caplog.text

    def test_source_inside_grid_is_quiet(self, small_raw, caplog):
        with caplog.at_level("WARNING", logger="wimo.config"):
            Config(small_raw)
        assert "not inside the grid" not in caplog.text

    def test_all_null_snr_is_noiseless(self, small_raw):
        for source in small_raw["sources"]:
            source["snr_db"] = None
        assert Config(small_raw).spec.noiseless


class TestOverrides:
    def test_scalar_and_indexed(self, small_raw):
        raw = apply_overrides(small_raw, ["estimator.m=5", "sources[0].snr_db=-5", "sampling.seed=9"])
        assert raw["estimator"]["m"] == 5
        assert raw["sources"][0]["snr_db"] == -5
        assert raw["sampling"]["seed"] == 9
        assert small_raw["estimator"]["m"] == 6

    def test_append_source(self, small_raw):
        raw = apply_overrides(
            small_raw,
            ["sources[2].theta=40", "sources[2].psd.kind=uniform",
             "sources[2].psd.f_l=1500", "sources[2].psd.f_h=4500"],
        )
        assert len(Config(raw).spec.sources) == 3

    def test_null_and_list_values(self, small_raw):
        raw = apply_overrides(small_raw, ["sources[0].snr_db=null", "sweep.values=[1, 2]"])
        assert raw["sources"][0]["snr_db"] is None
        assert raw["sweep"]["values"] == [1, 2]

    def test_malformed(self, small_raw):
        with pytest.raises(ConfigError, match="key=value"):
            apply_overrides(small_raw, ["estimator.m"])
        with pytest.raises(ConfigError, match="out of range"):
            apply_overrides(small_raw, ["sources[5].theta=1"])

    def test_seed_override_changes_spec(self):
        assert Config.load(overrides=["sampling.seed=2"]).spec.seed == 2


class TestModalSpec:
    def test_uniform_assumption_uses_band(self, small_raw):
        modal = Config(small_raw).spec.modal_spec()
        assert modal.psd is None
        assert (modal.fc, modal.bandwidth) == (3000.0, 3000.0)

    def test_band_override(self, small_raw):
        small_raw["estimator"]["band"] = {"f_l": 2000.0, "f_h": 4000.0}
        assert Config(small_raw).spec.assumed_band() == (2000.0, 4000.0)

    def test_true_psd_assumption(self, small_raw):
        for source in small_raw["sources"]:
            source["psd"] = {"kind": "gaussian", "fc": 3000.0, "bw3db": 1200.0}
        small_raw["estimator"]["psd_assumption"] = "true-psd"
        modal = Config(small_raw).spec.modal_spec()
        assert modal.psd is not None and modal.psd.kind == "gaussian"


class TestDocumentation:
    def test_epilog_lists_every_key(self):
        epilog = help_epilog()
        for key in CONFIG_SCHEMA:
            if key.type != "section":
                assert key.path in epilog

    def test_json_schema_matches_shipped_file(self):
        shipped = Path(__file__).resolve().parents[2] / "docs" / "experiment.schema.json"
        assert json.loads(shipped.read_text()) == json_schema()

    def test_json_schema_rejects_extra_keys(self):
        schema = json_schema()
        assert schema["additionalProperties"] is False
        assert "estimator" in schema["properties"]
