import json

import pytest

from app.main import run


def _report(out):
    return json.loads((out / "report.json").read_text())


def test_check_passes_on_small_eps(write_config, tmp_path):
    path = write_config({"catalog": "scalar_tanh", "params": {"eps": 0.1}})
    out = tmp_path / "out"
    assert run(["check", "--config", str(path), "--out", str(out)]) == 0
    report = _report(out)
    assert report["exit_code"] == 0
    assert report["result"]["hypothesis"]["q_certified"] == pytest.approx(0.1, abs=1e-6)
    assert "c1@C=1,alpha=0.5" in report["result"]["hypothesis"]["margins"]
    assert report["result"]["envelopes"]["total_violations"] == 0


def test_check_fails_without_contraction(write_config, tmp_path):
    path = write_config({"catalog": "scalar_tanh", "params": {"eps": 1.5}})
    assert run(["check", "--config", str(path), "--out", str(tmp_path / "out")]) == 2


def test_required_condition_sets_exit_code(write_config, tmp_path):
    path = write_config({"catalog": "scalar_tanh", "params": {"eps": 0.5}},
                        holder={"C": [0.01], "alpha": [0.5], "required": ["c1"]})
    assert run(["check", "--config", str(path), "--out", str(tmp_path / "out")]) == 2
    assert _report(tmp_path / "out")["result"]["required_failed"] == ["c1@C=0.01,alpha=0.5"]


def test_reports_are_reproducible(write_config, tmp_path):
    path = write_config({"catalog": "saddle_tanh", "params": {"eps": 0.2}})
    out = tmp_path / "out"
    run(["check", "--config", str(path), "--out", str(out), "--seed", "3"])
    first = (out / "report.json").read_bytes()
    run(["check", "--config", str(path), "--out", str(out), "--seed", "3"])
    assert (out / "report.json").read_bytes() == first


def test_example_command(tmp_path):
    out = tmp_path / "example"
    assert run(["example", "E3", "--out", str(out)]) == 0
    checks = _report(out)["result"]["example"]["checks"]
    assert [c["observed"] for c in checks] == [True, True, False]


def test_solve_writes_tables(write_config, tmp_path):
    path = write_config({"catalog": "scalar_tanh", "params": {"eps": 0.1}})
    out = tmp_path / "out"
    assert run(["solve", "--config", str(path), "--out", str(out), "--csv"]) == 0
    assert (out / "h_table.npz").exists() and (out / "hbar_table.npz").exists()
    lines = (out / "h_table.csv").read_text().splitlines()
    assert lines[0].startswith("# grid: ")
    assert lines[1] == "t,x1,y1,h1"
    assert _report(out)["result"]["h"]["info"]["iterations"] >= 1


def test_verify_reports_defects(write_config, tmp_path):
    path = write_config({"catalog": "scalar_tanh", "params": {"eps": 0.1}}, verify={"samples": 50, "horizon": 2.0})
    out = tmp_path / "out"
    assert run(["verify", "--config", str(path), "--out", str(out)]) == 0
    result = _report(out)["result"]
    assert result["inverse"]["max_defect"] <= result["inverse"]["budget"]
    assert result["periodicity_defect"] <= 1e-3


def test_discrete_oracle_command(write_config, tmp_path):
    path = write_config({"catalog": "discrete_scalar_tanh"}, oracle={"probes": 5, "depth": 6},
                        grid={"tau_min": -2, "tau_max": 2, "n_tau": 5, "n_x": 41, "n_y": 5, "box_x": 3, "box_y": 3})
    out = tmp_path / "out"
    assert run(["oracle", "--config", str(path), "--out", str(out), "--csv"]) == 0
    assert _report(out)["result"]["oracle"]["excesses"] == 0
    header = (out / "oracle_probes.csv").read_text().splitlines()[0]
    assert header == "n,x1,y1,gap,allowed,excess"


def test_oracle_rejects_continuous_system(write_config, tmp_path):
    path = write_config({"catalog": "scalar_tanh"})
    out = tmp_path / "out"
    assert run(["oracle", "--config", str(path), "--out", str(out)]) == 4
    assert _report(out)["result"]["error"]["type"] == "ConfigError"


@pytest.mark.parametrize("content", ["{not json", json.dumps({"system": {"catalog": "scalar_tanh"},
                                                              "numerics": {"h_ode": -1}})])
def test_invalid_config_exits_4(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    out = tmp_path / "out"
    assert run(["check", "--config", str(path), "--out", str(out)]) == 4
    assert not (out / "report.json").exists()


def test_missing_config_and_bad_arguments(tmp_path):
    assert run(["check", "--config", str(tmp_path / "missing.json")]) == 4
    assert run(["check"]) == 4
    assert run(["no_such_command"]) == 4
