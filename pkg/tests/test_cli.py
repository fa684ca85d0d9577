"""Command-line orchestration: suites, reports, exit codes, determinism."""

import json
from pathlib import Path

import pytest

from chevalley.cli import (
    EXPLAIN,
    RunConfig,
    SuiteReport,
    emit_report,
    main,
    run_suite,
)
from chevalley.errors import UsageError

FAST_B2 = dict(type_spec="B2", seed=1, samples=40, pairs=400, n_points=300,
               radius=1.0, pitch=0.05)


@pytest.fixture(scope="module")
def b2_report():
    return run_suite(RunConfig(command="all", **FAST_B2))


def test_full_b2_suite_passes(b2_report):
    assert b2_report.all_passed
    names = [c["name"] for c in b2_report.checks]
    assert "det-factorization" in names and "whitney-ratio" in names


def test_b2_report_contains_factorization_constant(b2_report):
    fac = next(c for c in b2_report.checks if c["name"] == "det-factorization")
    assert fac["metrics"]["c"] == 4.0


def test_emit_formats_round_trip(b2_report):
    blob = emit_report(b2_report, "json")
    doc = json.loads(blob)
    assert doc["schema_version"] == 1
    assert doc["all_passed"] is True
    # round trip through the parsed form reproduces the checks
    rep2 = SuiteReport(b2_report.config, checks=doc["checks"],
                       runtime_s=doc["runtime_s"])
    assert json.loads(emit_report(rep2, "json"))["checks"] == doc["checks"]
    text = emit_report(b2_report, "text").decode()
    assert "ALL PASSED" in text
    csv_blob = emit_report(b2_report, "csv").decode()
    assert csv_blob.splitlines()[0] == "check,status,metrics"


def test_empty_report_is_valid():
    rep = SuiteReport(RunConfig())
    doc = json.loads(emit_report(rep, "json"))
    assert doc["checks"] == [] and doc["all_passed"] is True


def test_determinism_excluding_runtime():
    a = run_suite(RunConfig(command="verify-jacobian", **FAST_B2))
    b = run_suite(RunConfig(command="verify-jacobian", **FAST_B2))
    da, db = a.to_dict(), b.to_dict()
    da.pop("runtime_s"), db.pop("runtime_s")
    assert json.dumps(da, default=str) == json.dumps(db, default=str)


def test_invalid_type_exits_2(capsys):
    assert main(["all", "--type", "E8"]) == 2
    assert "error" in capsys.readouterr().err


def test_usage_error_for_bad_config():
    with pytest.raises(UsageError):
        RunConfig(tol_zero=-1.0).validate()
    with pytest.raises(UsageError):
        run_suite(RunConfig(command="nonsense"))


def test_tampered_cache_exits_3(tmp_path, capsys):
    data = Path(__file__).parent.parent / "src" / "chevalley" / "data" / "H3.json"
    doc = json.loads(data.read_text())
    doc["polys"][1]["terms"][0]["a"] = "31337/1"
    (tmp_path / "H3.json").write_text(json.dumps(doc))
    code = main(["invariants", "--type", "H3", "--cache-dir", str(tmp_path)])
    assert code == 3
    assert "hash" in capsys.readouterr().err


def test_explain_covers_every_command(capsys):
    for name in ("invariants", "verify-jacobian", "verify-statement",
                 "morse", "fiber", "whitney", "all"):
        assert main([name, "--explain"]) == 0
        out = capsys.readouterr().out
        assert out.strip() == EXPLAIN[name]
    # each claim is distinct and nonempty
    texts = [EXPLAIN[k] for k in EXPLAIN]
    assert all(texts) and len(set(texts)) == len(texts)


def test_cli_all_b2_exit_zero(tmp_path, capsys):
    code = main([
        "all", "--type", "B2", "--seed", "1", "--samples", "40",
        "--pairs", "400", "--n", "300", "--a", "1.0", "--h", "0.05",
        "--format", "text",
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "ALL PASSED" in out


def test_cli_writes_report_and_converts(tmp_path, capsys):
    out = tmp_path / "rep.json"
    code = main([
        "verify-jacobian", "--type", "B2", "--seed", "2", "--out", str(out),
    ])
    assert code == 0 and out.exists()
    code = main(["report", "--in", str(out), "--format", "text"])
    assert code == 0
    assert "det-factorization" in capsys.readouterr().out


def test_cli_fiber_and_morse_commands(capsys):
    assert main(["morse", "--type", "B2", "--k", "1", "--m", "1.0"]) == 0
    capsys.readouterr()
    assert main(["fiber", "--type", "B3", "--k", "2", "--seed", "3",
                 "--n", "400"]) == 0
    doc = json.loads(capsys.readouterr().out)
    fib = next(c for c in doc["checks"] if c["name"].startswith("fiber"))
    assert fib["metrics"]["components"] == 1


def test_config_file_with_flag_override(tmp_path, capsys):
    cfgfile = tmp_path / "cfg.json"
    cfgfile.write_text(json.dumps({"type_spec": "B2", "seed": 5, "samples": 30}))
    code = main(["verify-jacobian", "--config", str(cfgfile), "--seed", "9"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["provenance"]["seed"] == 9
    assert doc["provenance"]["type"] == "B2"


def test_invariants_out_writes_cache(tmp_path, capsys):
    code = main(["invariants", "--type", "B3", "--out", str(tmp_path)])
    assert code == 0
    capsys.readouterr()
    assert (tmp_path / "B3.json").exists()
    from chevalley.invariants import load_basis
    from chevalley.coxeter import coxeter_type

    b = load_basis(tmp_path / "B3.json", coxeter_type("B3"))
    assert b.degrees == (2, 4, 6)


def test_convergence_error_maps_to_exit_4(monkeypatch, capsys):
    import chevalley.cli as cli
    from chevalley.errors import ConvergenceError

    def boom(cfg):
        raise ConvergenceError("solver stalled")

    monkeypatch.setattr(cli, "run_suite", boom)
    assert cli.main(["fiber", "--type", "B2"]) == 4
    assert "stalled" in capsys.readouterr().err
