import csv
import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from swboost import cli, experiments
from swboost.boxsolver import SolverError
from swboost.dataio import write_libsvm
from swboost.experiments import toy_instance

DATA = Path(__file__).parent / "data"
DOCS = Path(__file__).resolve().parents[1] / "docs"
IRIS = str(DATA / "iris.libsvm")


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def schema(name):
    return json.loads((DOCS / f"{name}.schema.json").read_text())


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize("loss", ["exp", "log"])
def test_train_writes_model_and_trace(tmp_path, capsys, loss):
    code, out, _ = run(capsys, "train", "--data", IRIS, "--loss", loss, "--rounds", 40,
                       "--nu", 1e-9, "--eta", 0.5, "--out", tmp_path / "m.json",
                       "--trace", tmp_path / "t.csv")
    assert code == 0
    summary = json.loads(out)
    jsonschema.validate(summary, schema("train_output"))
    assert summary["loss"] == loss
    jsonschema.validate(json.loads((tmp_path / "m.json").read_text()), schema("model"))
    rows = read_csv(tmp_path / "t.csv")
    assert rows[0][-1] == "solve_ms"
    assert len(rows) == summary["rounds"] + 1


def test_train_is_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        run(capsys, "train", "--data", IRIS, "--rounds", 20, "--seed", 4, "--out", tmp_path / f"{name}.json")
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    assert a == b


def test_missing_file_exit_code(tmp_path, capsys):
    missing = tmp_path / "absent.libsvm"
    code, _, err = run(capsys, "train", "--data", missing, "--out", tmp_path / "m.json")
    assert code == 1
    assert str(missing) in err


def test_malformed_data_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.libsvm"
    bad.write_text("1 1:0.5\n2 1:oops\n")
    code, _, err = run(capsys, "train", "--data", bad, "--out", tmp_path / "m.json")
    assert code == 1
    assert "bad.libsvm:2" in err


def test_bad_flag_value_exit_code(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--data", IRIS, "--eta", 2.0, "--out", tmp_path / "m.json")
    assert code == 1
    assert "eta" in err


def test_solver_failure_exit_code(tmp_path, capsys, monkeypatch):
    def broken(*args, **kwargs):
        raise SolverError("non-finite objective")
    monkeypatch.setattr(cli, "train", broken)
    code, _, err = run(capsys, "train", "--data", IRIS, "--out", tmp_path / "m.json")
    assert code == 2
    assert "non-finite" in err


def test_predict_and_evaluate(tmp_path, capsys):
    run(capsys, "train", "--data", IRIS, "--rounds", 30, "--out", tmp_path / "m.json")
    code, _, _ = run(capsys, "predict", "--model", tmp_path / "m.json", "--data", IRIS,
                     "--out", tmp_path / "p.csv")
    assert code == 0
    rows = read_csv(tmp_path / "p.csv")
    assert rows[0] == ["index", "predicted"]
    assert len(rows) == 151
    assert {r[1] for r in rows[1:]} <= {"1", "2", "3"}
    code, out, _ = run(capsys, "evaluate", "--model", tmp_path / "m.json", "--data", IRIS)
    summary = json.loads(out)
    jsonschema.validate(summary, schema("evaluate_output"))
    assert summary["error"] < 0.2


def test_evaluate_rejects_corrupt_model(tmp_path, capsys):
    (tmp_path / "m.json").write_text('{"format": "swboost-model", ')
    code, _, err = run(capsys, "evaluate", "--model", tmp_path / "m.json", "--data", IRIS)
    assert code == 1
    assert "line 1" in err


def test_sweep_single_repeat(tmp_path, capsys):
    code, out, _ = run(capsys, "sweep", "--data", IRIS, "--sweep", "nu", "--values", "0,1e-4",
                       "--repeats", 1, "--rounds", 20, "--per-class", 50, "--out", tmp_path / "s.csv")
    assert code == 0
    jsonschema.validate(json.loads(out), schema("sweep_output"))
    rows = read_csv(tmp_path / "s.csv")
    assert rows[0] == ["param", "repeat", "seed", "test_error"]
    data_rows = [r for r in rows[1:] if r[1].isdigit()]
    assert len(data_rows) == 2
    assert [r[1] for r in rows[1:] if not r[1].isdigit()] == ["mean", "std", "mean", "std"]


def test_sweep_rejects_empty_values(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["sweep", "--data", IRIS, "--values", ",", "--out", str(tmp_path / "s.csv")])
    assert exc.value.code == 2


def test_bench_rows_and_first_round(tmp_path, capsys):
    toy = tmp_path / "toy.libsvm"
    write_libsvm(toy_instance(0, m=60), toy)
    # Run twice so one-time import and allocation costs do not land in round 1.
    run(capsys, "bench", "--data", toy, "--rounds", 1, "--out", tmp_path / "warm.csv")
    code, out, _ = run(capsys, "bench", "--data", toy, "--rounds", 1, "--out", tmp_path / "b.csv")
    assert code == 0
    jsonschema.validate(json.loads(out), schema("bench_output"))
    rows = read_csv(tmp_path / "b.csv")
    assert rows[0] == ["round", "stagewise_ms", "fullycorrective_ms"]
    assert len(rows) == 2
    sw, fc = float(rows[1][1]), float(rows[1][2])
    assert fc <= 3 * sw and sw <= 3 * fc


def test_bench_skips_over_cap(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(cli, "FC_VARIABLE_CAP", 9)
    original = experiments.run_bench
    monkeypatch.setattr(cli, "run_bench", lambda d, c, r: original(d, c, r, fc_cap=9))
    code, out, _ = run(capsys, "bench", "--data", IRIS, "--rounds", 5, "--out", tmp_path / "b.csv")
    assert code == 0
    summary = json.loads(out)
    assert summary["fullycorrective_skipped"] == 2
    assert "skipped" in summary["note"]
    rows = read_csv(tmp_path / "b.csv")
    assert [r[2] == "" for r in rows[1:]] == [False, False, False, True, True]


def test_path_with_comparison(tmp_path, capsys):
    toy = tmp_path / "toy.libsvm"
    write_libsvm(toy_instance(0), toy)
    code, out, _ = run(capsys, "path", "--data", toy, "--pool", 8, "--compare-l1", "--grid", 20,
                       "--out", tmp_path / "path.csv")
    assert code == 0
    summary = json.loads(out)
    jsonschema.validate(summary, schema("path_output"))
    rows = read_csv(tmp_path / "path.csv")
    assert len(rows) == 1001
    assert float(rows[-1][1]) == 10.0
    assert len(read_csv(tmp_path / "path_l1.csv")) == 21
    assert summary["comparison"]["max_gap_over_gamma"] <= 0.15


def test_path_pool_limit(tmp_path, capsys):
    code, _, err = run(capsys, "path", "--data", IRIS, "--pool", 33, "--out", tmp_path / "p.csv")
    assert code == 1
    assert "--pool" in err


def test_module_entry_point():
    result = subprocess.run([sys.executable, "-m", "swboost", "--version"],
                            capture_output=True, text=True, check=True)
    assert result.stdout.startswith("swboost ")
