import csv
import json

import pytest

from chronoml.cli import main, read_config_file


def test_read_config_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("# comment\nbudget_s = 30\nmode = TEMPLATES_ONLY\nmax_trials = 5\n\nbeta = 2.5\n")
    assert read_config_file(path) == {
        "time_budget_s": 30, "ablation_mode": "TEMPLATES_ONLY", "max_trials": 5, "beta": 2.5,
    }
    path.write_text("no_such_key = 1\n")
    with pytest.raises(ValueError):
        read_config_file(path)
    path.write_text("just words\n")
    with pytest.raises(ValueError):
        read_config_file(path)


def test_end_to_end(tmp_path, capsys):
    data = tmp_path / "data"
    assert main(["synth", "--kind", "trend_season", "--seed", "1", "--params", '{"length": 80}',
                 "--out", str(data)]) == 0
    csv_path, meta_path = data / "trend_season_1.csv", data / "trend_season_1.json"
    conf = tmp_path / "run.conf"
    conf.write_text("budget_s = 60\ngrace_s = 5\nmax_trials = 50\n")
    run = tmp_path / "run"
    assert main(["fit", "--data", str(csv_path), "--meta", str(meta_path), "--config", str(conf),
                 "--mode", "ONLY", "--max-trials", "5", "--out", str(run)]) == 0
    report = json.loads((run / "report.json").read_text())
    assert report["n_trials"] == 5 and report["mode"] == "TEMPLATES_ONLY"

    out = tmp_path / "fc.csv"
    assert main(["forecast", "--model", str(run / "ensemble.json"), "--horizon", "4", "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4 and rows[0]["step"] == "1"

    kb_path = tmp_path / "kb.json"
    assert main(["build-priors", "--runs", str(run), "--out", str(kb_path)]) == 0
    assert len(json.loads(kb_path.read_text())["entries"]) == 1

    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps({
        "datasets": [{"csv": str(csv_path), "meta": str(meta_path)}],
        "modes": ["ONLY"],
        "run": {"time_budget_s": 60, "grace_period_s": 5, "max_trials": 3},
    }))
    assert main(["benchmark", "--suite", str(suite), "--seeds", "1", "--out", str(tmp_path / "bench")]) == 0
    assert (tmp_path / "bench" / "results.csv").exists()
    assert "TEMPLATES_ONLY" in capsys.readouterr().out
