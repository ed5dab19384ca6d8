import csv
import json

import pytest

from anisogauge.cli import main

P4_GAUGE = json.dumps({"phi": {"family": "power", "q": 4, "dim": 2},
                       "psi": {"family": "euclidean", "dim": 1}, "alpha": 0.5})


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_norms_verify_passes(capsys):
    code, out, _ = run(capsys, "norms-verify", "--norm", '{"family": "power", "q": 4, "dim": 2}')
    doc = json.loads(out)
    assert code == 0 and doc["passed"]
    assert {r["check"] for r in doc["results"]} >= {"unit_gradient", "double_dual",
                                                   "laplacian_of_half_dual_square"}
    assert doc["manifest"]["command"] == "norms-verify"
    assert doc["manifest"]["seed"] == 0


def test_norm_from_file(capsys, tmp_path):
    path = tmp_path / "norm.json"
    path.write_text(json.dumps({"family": "quadratic", "matrix": [[4, 0], [0, 1]]}))
    code, out, _ = run(capsys, "norms-verify", "--norm", str(path), "--samples", "20")
    assert code == 0


def test_gauge_check(capsys):
    code, out, _ = run(capsys, "gauge-check", "--gauge", P4_GAUGE, "--samples", "30", "--seed", "3")
    doc = json.loads(out)
    assert code == 0
    assert doc["results"][0]["Q"] == 3.5
    assert doc["manifest"]["params"]["samples"] == 30


def test_alpha_override(capsys):
    code, out, _ = run(capsys, "gauge-check", "--alpha", "2", "--samples", "10")
    assert code == 0
    assert json.loads(out)["results"][0]["Q"] == 5.0


def test_op_radial_check_csv(capsys, tmp_path):
    target = tmp_path / "radial.csv"
    code, out, _ = run(capsys, "op-radial-check", "--alpha", "1", "--p", "2", "--profile", "square", "log",
                       "--h", "1e-3", "--format", "csv", "--out", str(target))
    assert code == 0 and out == ""
    lines = target.read_text().splitlines()
    assert lines[0].startswith("# manifest: ")
    manifest = json.loads(lines[0][len("# manifest: "):])
    assert manifest["params"]["profile"] == ["square", "log"]
    rows = list(csv.DictReader(lines[1:]))
    assert [r["check"] for r in rows] == ["radial:square", "radial:log"]
    assert all(r["passed"] == "True" for r in rows)


def test_op_radial_check_fails_on_impossible_tolerance(capsys):
    code, out, _ = run(capsys, "op-radial-check", "--profile", "cube", "--h", "1e-2", "--tol", "1e-15",
                       "--samples", "5")
    assert code == 1
    assert json.loads(out)["passed"] is False


def test_fundsol_sweep(capsys):
    code, out, _ = run(capsys, "fundsol", "--alpha", "1", "0.5", "--p", "2", "--budget", "2000000")
    doc = json.loads(out)
    assert code == 0
    assert [r["alpha"] for r in doc["results"]] == [1.0, 0.5]
    assert doc["results"][0]["C"] == pytest.approx(0.15915494, rel=1e-5)


def test_fundsol_weak_test(capsys):
    code, out, _ = run(capsys, "fundsol", "--p", "2", "--weak-test", "--pole-sigma", "0.2")
    row = json.loads(out)["results"][0]
    assert code == 0
    assert row["weak_passed"] and row["pole_sigma"] == [0.2]
    assert abs(row["weak_ratio"] - 1) < 0.02


def test_weak_test_refused_below_p(capsys):
    code, _, err = run(capsys, "fundsol", "--alpha", "0.2", "--p", "4", "--weak-test")
    assert code == 2
    assert "refused" in err


def test_suite_selected_criteria(capsys):
    code, out, err = run(capsys, "suite", "--criteria", "norms")
    assert code == 0
    assert len(err.strip().splitlines()) == 2
    rows = list(csv.DictReader(out.splitlines()[1:]))
    assert [r["id"] for r in rows] == ["1", "2"]


@pytest.mark.parametrize("argv", [
    ["norms-verify", "--norm", '{"family": "power", "q": 1, "dim": 2}'],
    ["norms-verify", "--norm", "{not json"],
    ["norms-verify", "--norm", "/nonexistent/norm.json"],
    ["gauge-check", "--alpha", "-1"],
    ["op-radial-check", "--p", "1"],
    ["op-radial-check", "--profile", "quartic"],
    ["suite", "--criteria", "42"],
    ["fundsol", "--method", "tensor-gauss", "--budget", "10"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "error" in err


def test_argparse_errors_exit_two(capsys):
    with pytest.raises(SystemExit) as info:
        main(["gauge-check", "--format", "xml"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


def test_bad_thread_env(capsys, monkeypatch):
    monkeypatch.setenv("ANISOGAUGE_THREADS", "-3")
    code, _, err = run(capsys, "gauge-check", "--samples", "5")
    assert code == 2 and "ANISOGAUGE_THREADS" in err


def test_threads_recorded(capsys, monkeypatch):
    monkeypatch.setenv("ANISOGAUGE_THREADS", "3")
    code, out, _ = run(capsys, "gauge-check", "--samples", "5")
    assert json.loads(out)["manifest"]["threads"] == 3


def test_reports_are_reproducible(capsys):
    a = run(capsys, "fundsol", "--method", "monte-carlo", "--budget", "100000", "--rel-err", "0.1", "--seed", "4")[1]
    b = run(capsys, "fundsol", "--method", "monte-carlo", "--budget", "100000", "--rel-err", "0.1", "--seed", "4")[1]
    assert json.loads(a)["results"] == json.loads(b)["results"]
