import json

import numpy as np
import pytest

from kvlab.config import ConfigError, RunConfig, load_config, parse_config_text
from kvlab.discretization import GridSpec, PressureField
from kvlab.evolution import CSV_COLUMNS, DecayRecord
from kvlab.io import (
    ArtifactError,
    read_field_csv,
    read_json,
    read_timeseries_csv,
    write_field_csv,
    write_json,
    write_timeseries_csv,
)
from kvlab.shapes import named_field, random_smooth


def test_field_roundtrip_exact(tmp_path):
    g = GridSpec(8)
    f = random_smooth(g, 0)
    p = PressureField.from_vector(g, np.random.default_rng(0).standard_normal(g.n_p))
    write_field_csv(tmp_path / "f.csv", f, p, {"kind": "test"})
    f2, head = read_field_csv(tmp_path / "f.csv")
    np.testing.assert_array_equal(f2.to_vector(), f.to_vector())
    np.testing.assert_array_equal(head["pressure"].to_vector(), p.to_vector())
    assert head["kind"] == "test"


def test_field_truncated(tmp_path):
    g = GridSpec(8)
    write_field_csv(tmp_path / "f.csv", random_smooth(g, 0))
    lines = (tmp_path / "f.csv").read_text().splitlines()
    (tmp_path / "g.csv").write_text("\n".join(lines[:-5]) + "\n")
    with pytest.raises(ArtifactError):
        read_field_csv(tmp_path / "g.csv")
    with pytest.raises(ArtifactError):
        read_field_csv(tmp_path / "missing.csv")


def test_custom_csv_field(tmp_path):
    g = GridSpec(8)
    f = random_smooth(g, 3)
    write_field_csv(tmp_path / "f.csv", f)
    f2 = named_field("custom_csv", g, path=str(tmp_path / "f.csv"))
    np.testing.assert_array_equal(f2.to_vector(), f.to_vector())
    with pytest.raises(ValueError):
        named_field("custom_csv", GridSpec(16), path=str(tmp_path / "f.csv"))


def test_timeseries_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    recs = [DecayRecord(*rng.random(len(CSV_COLUMNS))) for _ in range(5)]
    write_timeseries_csv(tmp_path / "ts.csv", recs)
    assert read_timeseries_csv(tmp_path / "ts.csv") == recs
    (tmp_path / "bad.csv").write_text("t,x\n1,2\n")
    with pytest.raises(ArtifactError):
        read_timeseries_csv(tmp_path / "bad.csv")


def test_json(tmp_path):
    write_json(tmp_path / "a.json", {"b": 1, "a": [1.5]})
    assert (tmp_path / "a.json").read_text().index('"a"') < (tmp_path / "a.json").read_text().index('"b"')
    assert read_json(tmp_path / "a.json") == {"a": [1.5], "b": 1}
    with pytest.raises(ValueError):
        write_json(tmp_path / "n.json", {"x": float("nan")})
    (tmp_path / "c.json").write_text("{")
    with pytest.raises(ArtifactError):
        read_json(tmp_path / "c.json")


def test_config_parse_and_echo():
    cfg = parse_config_text("grid = 16\nnu = 0.5  # comment\nkappas = 0.1, 0\ndelta0 = auto\nlinear = true\n")
    assert cfg.grid == 16 and cfg.nu == 0.5 and cfg.kappas == (0.1, 0.0) and cfg.delta0 is None and cfg.linear
    assert parse_config_text(cfg.to_text()) == cfg


@pytest.mark.parametrize("text", [
    "gird = 16", "grid = 16\ngrid = 32", "grid = x", "grid", "nu = -1", "scheme = rk4", "kappa = -0.1",
    "forcing_kind = sinusoid", "grid = 4",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_load_from_manifest(tmp_path):
    cfg = RunConfig(grid=16, kappa=0.01)
    (tmp_path / "m.json").write_text(json.dumps({"config": cfg.to_dict()}))
    assert load_config(tmp_path / "m.json") == cfg
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")
