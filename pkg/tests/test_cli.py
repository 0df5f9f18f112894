import json

import pytest

from sle_coulomb import cli


def run(tmp_path, *args):
    return cli.main(list(args) + ["--out", str(tmp_path)])


def test_patterns_example(tmp_path, capsys):
    assert run(tmp_path, "patterns", "--n", "6", "--m", "3") == 0
    out = capsys.readouterr().out
    assert sum(1 for line in out.splitlines() if line.startswith("n=6 m=3 arcs=")) == 5
    assert "ballot" in out
    doc = json.loads((tmp_path / "patterns.json").read_text())
    assert len(doc["patterns"]) == 5


def test_verify_cm_example(tmp_path):
    assert run(tmp_path, "verify-cm", "--n", "3", "--kappa", "4", "--trials", "20") == 0
    report = json.loads((tmp_path / "verify-cm.summary.json").read_text())
    checks = report["summaries"][0]["checks"]
    assert len(checks) == 20 and all(c["residual"] < 1e-5 for c in checks)
    assert report["failed"] == []


def test_verify_nullvec_example(tmp_path):
    assert run(tmp_path, "verify-nullvec", "--n", "2", "--m", "1", "--kappa", "2.6667", "--pattern", "(1,2)") == 0
    assert (tmp_path / "nullvec.csv").exists()


def test_rational_kappa_accepted(tmp_path):
    assert run(tmp_path, "verify-nullvec", "--n", "2", "--m", "1", "--kappa", "8/3") == 0


def test_failing_check_sets_exit_status(tmp_path):
    # a deliberately wrong lambda_u breaks the dilatation identity
    code = run(tmp_path, "verify-ward", "--n", "2", "--m", "1", "--kappa", "3", "--kind", "ground",
               "--lambda-u", "5")
    assert code == 1
    report = json.loads((tmp_path / "verify-ward.summary.json").read_text())
    assert report["failed"] and {"name", "residual", "tolerance"} <= set(report["failed"][0])


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as info:
        run(tmp_path, "patterns", "--n", "-3", "--m", "1")
    assert info.value.code == 2
    with pytest.raises(cli.UsageError, match="bogus"):
        cli.RunConfig("patterns", {"n": 2, "bogus": 1}, str(tmp_path))
    with pytest.raises(cli.UsageError):
        cli.RunConfig("launch", {}, str(tmp_path))
    with pytest.raises(cli.UsageError, match="kappa"):
        cli.RunConfig("verify-cm", {"kappa": 0, "n": 2}, str(tmp_path))


def test_config_round_trip(tmp_path):
    cfg = cli.RunConfig("verify-cm", {"kappa": 8 / 3, "n": 3, "trials": 4}, str(tmp_path), seed=5)
    text = cfg.to_json()
    assert cli.RunConfig.from_json(text).to_json() == text
    with pytest.raises(cli.UsageError):
        cli.RunConfig.from_json(json.dumps({"subcommand": "patterns", "parameters": {}, "output_path": ".",
                                            "extra": 1}))


def test_emit_report_empty_and_failing(tmp_path):
    empty = cli.emit_report([], tmp_path / "e.json", timestamp="t")
    assert empty["checks_run"] == 0 and empty["failed"] == []
    json.loads((tmp_path / "e.json").read_text())
    s = cli.SuiteSummary("verify-cm")
    s.add("good", 1e-9, 1e-5)
    s.add("bad", 0.5, 1e-5)
    rep = cli.emit_report([s], tmp_path / "f.json", timestamp="t")
    assert rep["failed"] == [{"name": "bad", "residual": 0.5, "tolerance": 1e-5, "subcommand": "verify-cm"}]
    assert s.passed + len(s.failed) == s.checks_run


def test_simulate_reports_identical_modulo_timestamp(tmp_path):
    config = tmp_path / "evo.json"
    config.write_text(json.dumps({"kappa": "3", "points": [0.0, 1.0], "m": 1, "pattern": "(1,2)",
                                  "dt": 1e-3, "steps": 20, "seeds": [3]}))
    texts = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert cli.main(["simulate", "--config", str(config), "--out", str(out)]) == 0
        doc = json.loads((out / "simulate.summary.json").read_text())
        doc.pop("timestamp")
        texts.append((json.dumps(doc, sort_keys=True), (out / "traces_seed3.csv").read_bytes(),
                      (out / "evolution.json").read_bytes()))
    assert texts[0] == texts[1]


def test_eval_batch_and_report(tmp_path):
    jobs = tmp_path / "jobs.json"
    jobs.write_text(json.dumps([{"kappa": "6", "n": 2, "m": 1, "pattern": "(1,2)", "points": [0, 1]},
                                {"kappa": "8/3", "n": 3, "m": 1, "pattern": "(2,3)", "points": [0, 1, 2.2]}]))
    assert run(tmp_path, "eval", "--jobs-file", str(jobs), "--jobs", "2") == 0
    lines = (tmp_path / "eval.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("job_id,re_value,im_value,abs_error")
    assert run(tmp_path, "verify-capacity") == 0
    assert run(tmp_path, "report") == 0
    merged = json.loads((tmp_path / "report.summary.json").read_text())
    assert merged["checks_run"] == 3


def test_env_var_sets_default_output(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "envout"))
    assert cli.main(["patterns", "--n", "4", "--m", "2"]) == 0
    assert (tmp_path / "envout" / "patterns.json").exists()
