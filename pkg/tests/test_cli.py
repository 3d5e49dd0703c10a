import json
from pathlib import Path

import pytest

from beltrami.cli import CONFIG_SCHEMA, execute, list_catalog, main, validate_config
from beltrami.errors import ValidationError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def test_every_example_config_validates():
    files = sorted(CONFIGS.glob("*.json"))
    tasks = set()
    for f in files:
        cfg = json.loads(f.read_text())
        validate_config(cfg)
        tasks.add(cfg["task"])
    assert tasks == set(CONFIG_SCHEMA["properties"]["task"]["enum"])


def test_criteria_degenerate_log_report(tmp_path):
    out = tmp_path / "out"
    code = main(["run", "--config", str(CONFIGS / "criteria_degenerate_log.json"), "--out", str(out),
                 "--verbosity", "0"])
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    res = rep["hashed"]["results"]
    assert res["battery"]["verdicts"]["divergence"]["status"] == "Satisfied"
    assert res["fmo"]["verdict"] == "Finite"
    header = (out / "partial_integrals.csv").read_text().splitlines()[0]
    assert header == "r_or_eps,value"


def test_dirichlet_conformal_cos_report(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(CONFIGS / "dirichlet_conformal_cos.json"), "--out", str(out),
                 "--verbosity", "0"]) == 0
    res = json.loads((out / "report.json").read_text())["hashed"]["results"]
    assert res["boundary_residual"]["max_extrapolated"] < 1e-4
    assert (out / "residuals.csv").read_text().startswith("prime_end_id,depth,residual")


def test_negative_n_exits_2_without_artifacts(tmp_path, capsys):
    cfg = {"task": "solve", "coefficient": {"family": "constant", "k": [0.3, 0]},
           "domain": {"kind": "disk"}, "numeric": {"n": -4}}
    out = tmp_path / "out"
    assert main(["run", "--config", str(write(tmp_path, cfg)), "--out", str(out)]) == 2
    assert not out.exists()
    assert "numeric/n" in capsys.readouterr().err


@pytest.mark.parametrize("numeric", [{"tol": 0}, {"delta": -0.1}, {"eps0": -1}, {"n": 100}])
def test_nonpositive_tolerances_rejected(numeric):
    cfg = {"task": "solve", "coefficient": {"family": "constant"}, "domain": {"kind": "disk"},
           "numeric": numeric}
    with pytest.raises(ValidationError):
        validate_config(cfg)


def test_missing_task_inputs_rejected():
    with pytest.raises(ValidationError):
        validate_config({"task": "dirichlet", "domain": {"kind": "disk"}})


def test_unreadable_config_exits_2(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_solver_error_exits_3_and_is_reported(tmp_path):
    cfg = {"task": "solve", "coefficient": {"family": "radial_stretch", "K": 3.0},
           "domain": {"kind": "disk"}, "numeric": {"n": 64, "maxiter": 2}}
    out = tmp_path / "out"
    assert main(["run", "--config", str(write(tmp_path, cfg)), "--out", str(out), "--verbosity", "0"]) == 3
    rep = json.loads((out / "report.json").read_text())["hashed"]
    assert rep["status"] == "error" and rep["error"]["type"] == "SolverError"


def test_inconclusive_only_criteria_exits_4(tmp_path):
    # one decade of radii leaves every criterion undecided
    cfg = {"task": "criteria", "coefficient": {"family": "degenerate_log"}, "z0": [0, 0],
           "numeric": {"decades": 1}}
    report, _, code = execute(cfg)
    assert code == 4
    assert report["hashed"]["exit_code"] == 4


def test_catalog_listing(capsys):
    full = list_catalog("")
    assert full == sorted(full)
    for item in ("radial_stretch coefficient", "degenerate_log coefficient", "exponential Φ"):
        assert item in full
    assert list_catalog("no-such-entry") == []
    assert main(["catalog", "no-such-entry"]) == 0
    assert capsys.readouterr().out == ""


def test_schema_command_prints_json(capsys):
    assert main(["schema"]) == 0
    assert json.loads(capsys.readouterr().out)["title"] == "beltrami run config"


def test_report_hash_excludes_wall_time(tmp_path):
    cfg = json.loads((CONFIGS / "modulus_ring_radial_stretch.json").read_text())
    a, fa, _ = execute(cfg)
    b, fb, _ = execute(cfg)
    assert a["sha256"] == b["sha256"]
    assert fa == fb
    assert "wall_seconds" in a["timing"] and "timing" not in a["hashed"]
