import json
import os

import numpy as np
import pytest

from dryfriction import cli, config as cfgmod, serialize
from dryfriction.errors import ConfigurationError
from dryfriction.experiments import PinningReport

MINIMAL = """\
obstacle.lambda = 50
obstacle.rho = 0.1
obstacle.delta = 0.04
obstacle.Y = 1
obstacle.n = 1
grid.m = 64
"""


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_empty_input_lists_every_required_key():
    with pytest.raises(ConfigurationError) as exc:
        cfgmod.parse_config("")
    for key in ("obstacle.lambda", "obstacle.rho", "obstacle.delta", "obstacle.Y", "obstacle.n", "grid.m"):
        assert key in str(exc.value)


def test_minimal_config_gets_defaults_and_normalized_dump():
    cfg = cfgmod.parse_config(MINIMAL)
    text = cfgmod.dump(cfg)
    for key in cfgmod.SCHEMA:
        assert f"{key} = " in text
    assert cfg["solver.backend"] == "prox" and cfg["run.seed"] == 0
    assert cfgmod.parse_config(text) == cfg
    assert cfgmod.dump(cfgmod.parse_config(text)) == text


def test_invariant_violation_message():
    text = MINIMAL.replace("obstacle.rho = 0.1", "obstacle.rho = 0.05").replace("obstacle.delta = 0.04", "obstacle.delta = 0.1")
    with pytest.raises(ConfigurationError, match="radius must exceed mollification_width"):
        cfgmod.parse_config(text)


@pytest.mark.parametrize("extra, msg", [
    ("bogus.key = 1\n", "unknown keys"),
    ("grid.m 64\n", "line 7"),
    ("grid.m = 32\n", "duplicate"),
    ("solver.cfl_factor = 2\n", "cfl_factor"),
    ("solver.t_max = abc\n", "invalid value"),
    ("eps.values = 0.1, 0.3\n", "decreasing"),
])
def test_config_errors(extra, msg):
    with pytest.raises(ConfigurationError, match=msg):
        cfgmod.parse_config(MINIMAL + extra)


def test_comments_and_blank_lines_ignored():
    cfg = cfgmod.parse_config("# header\n\n" + MINIMAL + "  # trailing comment line\n")
    assert cfg["grid.m"] == 64


def test_seed_override_and_field_seed():
    cfg = cfgmod.parse_config(MINIMAL + "run.seed = 5\n")
    assert cfg.field_seed == 5 and cfg.obstacle.seed == 5
    cfg2 = cfgmod.parse_config(MINIMAL + "obstacle.seed = 9\n").with_seed(3)
    assert cfg2.seed == 3 and cfg2.field_seed == 9
    assert len(cfg.ensemble_seeds()) == 8 and cfg.ensemble_seeds() == cfg.ensemble_seeds()


def test_simulate_zero_force(tmp_path):
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--config", _write(tmp_path, MINIMAL), "--out", str(out)]) == 0
    res = json.loads((out / "result.json").read_text())
    assert res["outcome"] == "stationary"
    header, rows = serialize.read_csv((out / "trajectory.csv").read_text())
    assert header[4] == "max_excess"
    assert np.all(rows[1:, 4] <= 1e-8)
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["artifacts"]) == {"trajectory.csv", "final_state.json", "result.json", "profile.svg"}
    assert manifest["seeds"]["field"] == 0
    assert "PCG64" in manifest["generator"]


def test_verify_reproduces_checksums(tmp_path, capsys):
    out = tmp_path / "sim"
    cfg_path = _write(tmp_path, MINIMAL + "forcing.value = 0.3\nsolver.t_max = 2\n")
    assert cli.main(["simulate", "--config", cfg_path, "--out", str(out), "--seed", "4"]) == 0
    capsys.readouterr()
    assert cli.main(["verify", "--manifest", str(out / "manifest.json"), "--out", str(tmp_path / "again")]) == 0
    assert json.loads(capsys.readouterr().out)["ok"] is True


def test_verify_detects_tampering(tmp_path):
    out = tmp_path / "sim"
    cli.main(["simulate", "--config", _write(tmp_path, MINIMAL), "--out", str(out)])
    with open(out / "result.json", "a") as fh:
        fh.write(" ")
    manifest = json.loads((out / "manifest.json").read_text())
    manifest["artifacts"]["result.json"] = serialize.sha256_file(str(out / "result.json"))
    (out / "manifest.json").write_text(json.dumps(manifest))
    res = cli.verify_manifest(str(out / "manifest.json"), str(tmp_path / "again"))
    assert not res["ok"] and res["mismatched"] == ["result.json"]


def test_pin_threshold_report_roundtrip(tmp_path):
    out = tmp_path / "pin"
    assert cli.main(["pin-threshold", "--config", _write(tmp_path, MINIMAL), "--out", str(out)]) == 0
    rep = PinningReport.from_json((out / "pinning_report.json").read_text())
    assert rep.violations() == []
    assert 0 < rep.F_lo < rep.F_hi <= 1.0
    assert PinningReport.from_json(rep.to_json()).to_json() == rep.to_json()


def test_errors_become_json_with_nonzero_exit(tmp_path, capsys):
    code = cli.main(["simulate", "--config", _write(tmp_path, "grid.m = 64\n"), "--out", str(tmp_path / "x")])
    err = json.loads(capsys.readouterr().err)
    assert code != 0 and err["error"] == "ConfigurationError"
    code = cli.main(["simulate", "--config", str(tmp_path / "missing.cfg")])
    assert code != 0 and "error" in json.loads(capsys.readouterr().err)


def test_eps_study_and_ensemble_artifacts(tmp_path):
    text = MINIMAL + "eps.T = 0.05\neps.samples = 5\n"
    out = tmp_path / "eps"
    assert cli.main(["eps-study", "--config", _write(tmp_path, text), "--out", str(out)]) == 0
    rep = json.loads((out / "eps_study.json").read_text())
    assert len(rep["gaps"]) == 5
    out = tmp_path / "ens"
    text = MINIMAL.replace("grid.m = 64", "grid.m = 32") + "pinning.steps = 6\n"
    assert cli.main(["ensemble", "--config", _write(tmp_path, text, "ens.cfg"), "--out", str(out)]) == 0
    ens = json.loads((out / "ensemble.json").read_text())
    assert len(ens["seeds"]) == 8 and len(ens["brackets"]) == 8
