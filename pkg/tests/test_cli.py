import json

import pytest

from kvlab.cli import main

SMALL = """grid = 16
nu = 1.0
kappa = {kappa}
steady_forcing = vortex
steady_amplitude = 5.0
forcing_kind = exponential
forcing_amplitude = 0.2
forcing_sigma = 6.0
z0_kind = random
z0_amplitude = 0.05
dt = 0.01
horizon = 3.0
n_samples = 200
out = {out}
run_id = small
"""


def write_cfg(tmp_path, kappa=0.01, name="run.cfg"):
    out = tmp_path / "out"
    p = tmp_path / name
    p.write_text(SMALL.format(kappa=kappa, out=out))
    return p, out


def pipeline(cfg):
    return [main([cmd, "--config", str(cfg)]) for cmd in ("steady", "spectral", "evolve", "verify")]


@pytest.fixture(scope="module")
def finished(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    cfg, out = write_cfg(tmp)
    codes = pipeline(cfg)
    return cfg, out, codes


def test_pipeline_exit_codes(finished):
    _, out, codes = finished
    assert codes == [0, 0, 0, 0]
    for name in ("steady_field.csv", "steady_report.json", "constants.json", "timeseries.csv", "diagnostics.csv",
                 "manifest.json", "verdicts.json", "final_field.csv", "config.txt", "plot/wE.dat"):
        assert (out / name).is_file(), name
    rep = json.loads((out / "verdicts.json").read_text())
    assert rep["status"] == "pass"
    assert {c["claim"] for c in rep["claims"]} >= {"lemma1_energy", "theorem1", "theorem2_int_pressure"}


def test_rerun_is_byte_identical(finished):
    cfg, out, _ = finished
    names = ("steady_field.csv", "constants.json", "timeseries.csv", "diagnostics.csv", "manifest.json",
             "verdicts.json", "final_field.csv")
    before = {n: (out / n).read_bytes() for n in names}
    assert pipeline(cfg) == [0, 0, 0, 0]
    assert {n: (out / n).read_bytes() for n in names} == before


def test_verify_from_manifest_config(finished):
    _, out, _ = finished
    assert main(["verify", "--config", str(out / "manifest.json")]) == 0


def test_config_error_exit(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("grid = 16\nbogus = 1\n")
    assert main(["steady", "--config", str(p)]) == 2
    assert main(["steady", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_missing_artifact_exit(tmp_path):
    cfg, _ = write_cfg(tmp_path)
    assert main(["evolve", "--config", str(cfg)]) == 3
    assert main(["verify", "--config", str(cfg)]) == 3


def test_refuses_when_a1_fails(tmp_path, finished):
    cfg, out = write_cfg(tmp_path)
    src = finished[1]
    out.mkdir()
    for n in ("steady_field.csv", "constants.json"):
        (out / n).write_bytes((src / n).read_bytes())
    doc = json.loads((out / "constants.json").read_text())
    doc["constants"]["lambda0"] = -1.0
    (out / "constants.json").write_text(json.dumps(doc))
    assert main(["evolve", "--config", str(cfg)]) == 1
    assert not (out / "timeseries.csv").exists()


def test_truncated_timeseries_exit(tmp_path, finished):
    cfg, out = write_cfg(tmp_path)
    src = finished[1]
    out.mkdir()
    for n in ("manifest.json", "timeseries.csv", "diagnostics.csv"):
        (out / n).write_bytes((src / n).read_bytes())
    lines = (out / "timeseries.csv").read_text().splitlines()
    (out / "timeseries.csv").write_text("\n".join(lines[: len(lines) // 3]) + "\n")
    assert main(["verify", "--config", str(cfg)]) == 1
