import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from siglasso.cli import main, read_paths_csv, ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(tmp_path, *argv):
    return main([*argv, "--out-dir", str(tmp_path)])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def path_file(tmp_path):
    rng = np.random.default_rng(0)
    f = tmp_path / "paths.csv"
    lines = ["path_id,t,x1,x2"]
    for pid in ("a", "b"):
        x = np.cumsum(rng.standard_normal((11, 2)), axis=0)
        lines += [f"{pid},{k / 10},{float(x[k, 0])!r},{float(x[k, 1])!r}" for k in range(11)]
    f.write_text("\n".join(lines) + "\n")
    return f


def test_signature_columns(tmp_path, path_file):
    assert run(tmp_path, "signature", "--input", str(path_file), "--K", "4", "--d", "2") == 0
    rows = read_csv(tmp_path / "signature.csv")
    assert len(rows) == 2
    assert len(rows[0]) - 1 == 31
    manifest = json.loads((tmp_path / "signature_manifest.json").read_text())
    assert manifest["outputs"][0]["file"] == "signature.csv"


def test_signature_first_order_scheme_independent(tmp_path, path_file):
    a, b = tmp_path / "a", tmp_path / "b"
    run(a, "signature", "--input", str(path_file), "--convention", "ito")
    run(b, "signature", "--input", str(path_file), "--convention", "stratonovich")
    ra, rb = read_csv(a / "signature.csv"), read_csv(b / "signature.csv")
    for x, y in zip(ra, rb):
        assert x["(1)"] == y["(1)"] and x["(2)"] == y["(2)"]
        assert x["(1,2)"] != y["(1,2)"] or x["(1,1)"] != y["(1,1)"]


def test_signature_constant_path(tmp_path):
    f = tmp_path / "c.csv"
    f.write_text("t,x1\n0,2\n0.5,2\n1,2\n")
    run(tmp_path, "signature", "--input", str(f), "--K", "3")
    row = read_csv(tmp_path / "signature.csv")[0]
    assert float(row["()"]) == 1.0
    assert all(float(row[k]) == 0.0 for k in ("(1)", "(1,1)", "(1,1,1)"))


def test_signature_dimension_check(tmp_path, path_file, capsys):
    assert run(tmp_path, "signature", "--input", str(path_file), "--d", "3") == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and "--d" in err["message"]


@pytest.mark.parametrize("body, where", [
    ("t,x1\n0,1\n1,oops\n", ":3:"),
    ("t,x1\n0,1\n1\n", ":3:"),
    ("x,y\n0,1\n", ":1:"),
    ("t,x1\n0,1\n0,2\n", ":3:"),
])
def test_malformed_csv_line_numbers(tmp_path, body, where):
    f = tmp_path / "bad.csv"
    f.write_text(body)
    with pytest.raises(ConfigError, match=where):
        read_paths_csv(str(f))


def test_irrep_example(tmp_path):
    assert run(tmp_path, "irrep", "--config", str(CONFIGS / "irrep_example.yaml")) == 0
    rep = json.loads((tmp_path / "irrep.json").read_text())
    assert rep["verdict"] == "FAIL"
    assert rep["norm_i"] == pytest.approx(1.01, abs=0.005)


def test_corr_ito_identity(tmp_path):
    assert run(tmp_path, "corr", "--process", "bm", "--convention", "ito", "--rho", "0") == 0
    with open(tmp_path / "corr.csv") as fh:
        rows = list(csv.reader(fh))
    M = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    np.testing.assert_array_equal(M, np.eye(31))
    assert len(read_csv(tmp_path / "corr_long.csv")) == 31 * 31


def test_bounds(tmp_path):
    assert run(tmp_path, "bounds", "--config", str(CONFIGS / "bounds.yaml")) == 0
    out = json.loads((tmp_path / "bounds.json").read_text())
    assert out["sufficient_bound"] == pytest.approx(0.2)
    assert out["equicorrelation_thresholds"]["3"] == pytest.approx(-0.2)
    assert 0 < out["ito"]["P_min"] <= 1


def test_simulate_roundtrip(tmp_path):
    assert run(tmp_path, "simulate", "--process", "brownian", "--d", "2", "--seed", "4") == 0
    paths, d = read_paths_csv(str(tmp_path / "paths.csv"))
    assert d == 2 and len(paths) == 1 and paths[0][1].size == 101


def test_schema_errors_have_field_paths(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("K: four\n")
    assert run(tmp_path, "corr", "--config", str(cfg)) == 2
    err = json.loads(capsys.readouterr().err)
    assert "config.K" in err["message"]
    cfg.write_text("colour: red\n")
    assert run(tmp_path, "corr", "--config", str(cfg)) == 2
    assert "colour" in json.loads(capsys.readouterr().err)["message"]
    assert not (tmp_path / "corr.csv").exists()


def test_usage_error_is_json(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--axis", "nonsense"])
    assert exc.value.code == 2
    assert "error" in json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_sweep_thread_invariance_and_replay(tmp_path):
    args = ["sweep", "--axis", "rho", "--reps", "4", "--batches", "2", "--K", "3"]
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = tmp_path / "g.yaml"
    cfg.write_text("grid: [0.0, 0.5]\nn_samples: 30\nn_steps: 20\n")
    assert run(a, *args, "--config", str(cfg), "--threads", "1") == 0
    assert run(b, *args, "--config", str(cfg), "--threads", "2") == 0
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
    c = tmp_path / "c"
    assert run(c, "sweep", "--config", str(a / "sweep_manifest.json")) == 0
    assert (c / "sweep.csv").read_bytes() == (a / "sweep.csv").read_bytes()


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SIGLASSO_THREADS", "2")
    assert run(tmp_path, "corr", "--K", "2") == 0
    assert json.loads((tmp_path / "corr_manifest.json").read_text())["threads"] == 2


def test_json_format(tmp_path):
    assert run(tmp_path, "consistency", "--reps", "2", "--batches", "2", "--K", "2", "--format", "json") == 0
    files = {p.name for p in tmp_path.iterdir()}
    assert any(f.endswith(".json") and "manifest" not in f for f in files)


def test_console_script(tmp_path):
    out = subprocess.run([sys.executable, "-m", "siglasso.cli", "bounds", "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "bounds.json").exists()
