import numpy as np
import pytest

from impulsegame import ConfigError, GridSpec, SolveOptions, solve
from impulsegame.serialize import (
    load_field,
    save_field,
    toml_dump,
    toml_dumps,
    toml_load,
)


class TestTomlEmitter:
    def test_nested_round_trip(self, tmp_path):
        data = {
            "name": "run",
            "count": 3,
            "scale": 0.125,
            "flag": True,
            "values": [1.0, 2.5, -3.0],
            "grid": {"lower": [-2.0], "nested": {"deep": "yes"}},
        }
        path = tmp_path / "cfg.toml"
        toml_dump(data, path)
        assert toml_load(path) == data

    def test_floats_survive_exactly(self, tmp_path):
        data = {"x": 0.1 + 0.2, "y": 1e-300, "z": -0.0}
        path = tmp_path / "f.toml"
        toml_dump(data, path)
        back = toml_load(path)
        assert back["x"] == data["x"]
        assert back["y"] == data["y"]

    def test_strings_are_escaped(self):
        text = toml_dumps({"s": 'quote " and \\ slash'})
        assert 'quote \\" and \\\\ slash' in text

    def test_parse_error_is_config_error(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("key = = broken")
        with pytest.raises(ConfigError, match="cannot parse"):
            toml_load(path)


class TestFieldRoundTrip:
    @pytest.fixture
    def solved(self, p3_spec):
        grid = GridSpec((-2.0,), (2.0,), (21,), 10)
        return p3_spec, grid, solve(p3_spec, grid, SolveOptions())

    def test_bit_exact_round_trip(self, tmp_path, solved):
        spec, grid, field = solved
        save_field(field, spec, tmp_path)
        back = load_field(tmp_path, spec)
        assert back.spec_fingerprint == field.spec_fingerprint
        np.testing.assert_array_equal(back.times, field.times)
        for a, b in zip(back.slices, field.slices):
            np.testing.assert_array_equal(a, b)
        assert back.policies == field.policies
        assert back.options == field.options
        assert back.clamp_count == field.clamp_count

    def test_missing_slice_rejected(self, tmp_path, solved):
        spec, grid, field = solved
        save_field(field, spec, tmp_path)
        (tmp_path / "slice_0003.csv").unlink()
        with pytest.raises(ConfigError, match="missing"):
            load_field(tmp_path, spec)

    def test_truncated_slice_rejected(self, tmp_path, solved):
        spec, grid, field = solved
        save_field(field, spec, tmp_path)
        path = tmp_path / "slice_0002.csv"
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-3]) + "\n")
        with pytest.raises(ConfigError, match="truncated"):
            load_field(tmp_path, spec)

    def test_manifest_echoes_run_context(self, tmp_path, solved):
        spec, grid, field = solved
        save_field(field, spec, tmp_path,
                   config_echo={"problem": {"builtin": spec.name}})
        manifest = toml_load(tmp_path / "manifest.toml")
        assert manifest["spec_fingerprint"] == spec.fingerprint()
        assert manifest["grid"]["time_steps"] == grid.time_steps
        assert manifest["config"]["problem"]["builtin"] == spec.name
