import json

import pytest

from cdrshift.cli import main


def test_oracle_command(capsys):
    assert main(["oracle", "--scenario", "S1", "--theta0", "0", "--theta1", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["threshold_source_posterior"] == pytest.approx(0.47)
    assert out["optimal_set"]["members"] == [[3.0], [4.0]]
    assert out["gnp"]["saturated"] is False


def test_oracle_command_on_box(capsys):
    assert main(["oracle", "--scenario", "S3"]) == 0
    out = json.loads(capsys.readouterr().out)
    lo, hi = out["optimal_set"]["intervals"][0]
    assert hi == 5.0 and 1.0 < lo < 1.1


def test_fit_command(capsys, monkeypatch):
    monkeypatch.delenv("CDR_SEED", raising=False)
    assert main(["fit", "--scenario", "S4", "--method", "histogram", "--m", "500", "--n", "500"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["report"]["mode"] == "ExactGrid"
    assert 0.0 <= out["report"]["sym_diff_risk"] <= 1.0


def test_evaluate_and_sweep_commands(tmp_path, capsys):
    out_csv = tmp_path / "eval.csv"
    assert main(["evaluate", "--scenario", "S1", "--method", "histogram", "--m", "100", "--n", "100",
                 "--replicates", "2", "--out", str(out_csv)]) == 0
    assert len(out_csv.read_text().splitlines()) == 3
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"scenario": "S4", "methods": ["histogram"], "ladder": [[50, 50]],
                                "alphas": [0.25], "replicates": 2}))
    assert main(["sweep", "--plan", str(plan), "--out", str(tmp_path / "s.csv")]) == 0
    assert "histogram" in capsys.readouterr().out


def test_verify_quick(tmp_path):
    assert main(["verify", "--quick", "--out", str(tmp_path / "v.csv")]) == 0
    assert (tmp_path / "v.csv").read_text().startswith("fixture,property,status,max_error,detail")


def test_declared_errors_exit_with_code_two(capsys):
    assert main(["oracle", "--scenario", "S99"]) == 2
    assert "InvalidInput" in capsys.readouterr().err
    assert main(["oracle", "--scenario", "S1", "--alpha", "0.1"]) == 0
