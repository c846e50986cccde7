import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from regimeswitch.cli import main

DATA = Path(__file__).parent / "data"
MSCD_MODEL = str(DATA / "mscd_model.json")
MSCD_THETA = str(DATA / "mscd_theta.json")
HAM_MODEL = str(DATA / "hamilton_model.json")
HAM_THETA = str(DATA / "hamilton_theta.json")
HAM_NAMES = ["mu_1", "mu_2", "ar_1", "ar_2", "ar_3", "ar_4", "sigma", "p_11", "p_22"]


def run(*args):
    return main([str(a) for a in args])


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def mscd_series(tmp_path_factory):
    out = tmp_path_factory.mktemp("mscd") / "d.csv"
    assert run("simulate", "--model", MSCD_MODEL, "--theta", MSCD_THETA,
               "--n", 300, "--seed", 7, "--out", out) == 0
    return out


@pytest.fixture(scope="module")
def mscd_fit(mscd_series):
    out = mscd_series.parent / "fit.json"
    assert run("fit", "--model", MSCD_MODEL, "--data", mscd_series, "--starts", 2, "--out", out) == 0
    return out


def _same_structure(a, b, path="$"):
    assert type(a) is type(b) or {type(a), type(b)} <= {int, float}, path
    if isinstance(a, dict):
        assert list(a) == list(b), path
        for k in a:
            _same_structure(a[k], b[k], f"{path}.{k}")
    elif isinstance(a, list):
        assert len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            _same_structure(x, y, f"{path}[{i}]")
    elif isinstance(a, float):
        assert a == pytest.approx(b, rel=1e-6, abs=1e-9), path
    else:
        assert a == b, path


def test_golden_mscd_fit(mscd_fit):
    golden = json.loads((DATA / "golden_mscd_fit.json").read_text())
    _same_structure(json.loads(Path(mscd_fit).read_text()), golden)


def test_simulate_output(mscd_series):
    rows = _rows(mscd_series)
    assert rows[0] == ["y", "regime"]
    assert len(rows) == 1 + 301
    assert {r[1] for r in rows[1:]} <= {"1", "2"}


def test_fit_hamilton_schema(tmp_path):
    data = tmp_path / "h.csv"
    assert run("simulate", "--model", HAM_MODEL, "--theta", HAM_THETA, "--n", 400,
               "--seed", 1, "--out", data) == 0
    out = tmp_path / "fit.json"
    assert run("fit", "--model", HAM_MODEL, "--data", data, "--starts", 1, "--init", "x0=2",
               "--out", out) == 0
    doc = json.loads(out.read_text())
    assert list(doc["parameters"]) == HAM_NAMES
    assert doc["init"] == {"type": "point_mass", "state": 31, "regimes": [2] * 5}
    csv_out = tmp_path / "fit.csv"
    assert run("--paper-format", "fit", "--model", HAM_MODEL, "--data", data, "--starts", 1,
               "--out", csv_out) == 0
    rows = _rows(csv_out)
    assert rows[0] == ["parameter", "Estimate", "S.D."]
    assert [r[0] for r in rows[1:]] == HAM_NAMES + ["Log-likelihood"]
    assert all(len(r[1].split(".")[1]) == 3 for r in rows[1:])


def test_smooth_shape(tmp_path, mscd_series, mscd_fit):
    out = tmp_path / "probs.csv"
    assert run("smooth", "--fit", mscd_fit, "--data", mscd_series, "--out", out) == 0
    rows = _rows(out)
    assert rows[0] == ["t", "prob_regime_1", "prob_regime_2"]
    assert len(rows) - 1 == 300
    probs = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    assert np.allclose(probs.sum(axis=1), 1.0, atol=2e-6)


def test_coverage_smoke(tmp_path):
    out = tmp_path / "cov.csv"
    assert run("coverage", "--model", MSCD_MODEL, "--theta", MSCD_THETA, "--n", 150, 200,
               "--reps", 3, "--starts", 1, "--ci", "all", "--out", out) == 0
    rows = _rows(out)
    assert rows[0] == ["n", "method", "mu_1", "mu_2", "beta", "gamma", "p_11", "p_22", "R_effective"]
    assert len(rows) == 1 + 2 * 3
    assert all(int(r[-1]) <= 3 for r in rows[1:])
    side = json.loads((tmp_path / "cov.json").read_text())
    assert len(side["reports"]) == 6


def test_diagnose_commands(tmp_path, mscd_series):
    out = tmp_path / "mix.csv"
    assert run("diagnose-mixing", "--model", MSCD_MODEL, "--theta", MSCD_THETA, "--data",
               mscd_series, "--m", 2, "--out", out) == 0
    rows = _rows(out)
    assert rows[0] == ["k", "tv_distance", "bound", "margin"]
    assert rows[1][0] == "-2" and len(rows) == 1 + 301
    summary = json.loads((tmp_path / "mix.json").read_text())
    assert summary["passed"] and summary["p"] == 1
    dump = tmp_path / "chain.json"
    assert run("diagnose", "--model", HAM_MODEL, "--theta", HAM_THETA, "--out", dump) == 0
    doc = json.loads(dump.read_text())
    assert np.allclose(np.sum(doc["T"], axis=1), 1.0)


def test_repeated_runs_are_byte_identical(tmp_path):
    outputs = []
    for rep in range(2):
        d = tmp_path / f"r{rep}"
        d.mkdir()
        assert run("simulate", "--model", MSCD_MODEL, "--theta", MSCD_THETA, "--n", 200,
                   "--seed", 11, "--out", d / "d.csv") == 0
        assert run("fit", "--model", MSCD_MODEL, "--data", d / "d.csv", "--starts", 2,
                   "--seed", 4, "--out", d / "fit.json") == 0
        assert run("smooth", "--fit", d / "fit.json", "--data", d / "d.csv", "--out", d / "s.csv") == 0
        assert run("coverage", "--model", MSCD_MODEL, "--theta", MSCD_THETA, "--n", 120,
                   "--reps", 2, "--starts", 1, "--seed", 4, "--out", d / "c.csv") == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outputs[0] == outputs[1]
    assert len(outputs[0]) == 5


def test_error_exit_codes(tmp_path, capsys, mscd_series):
    assert run("fit", "--model", tmp_path / "missing.json", "--data", mscd_series,
               "--out", tmp_path / "x.json") == 2
    assert "E_USAGE" in capsys.readouterr().err
    assert run("fit", "--model", MSCD_MODEL, "--data", mscd_series, "--out", tmp_path / "x.txt") == 2
    assert run("frobnicate") == 2
    assert capsys.readouterr().err.strip().splitlines()[-1].startswith("error: E_USAGE:")
    const = tmp_path / "const.csv"
    const.write_text("y\n" + "1.0\n" * 20)
    assert run("fit", "--model", MSCD_MODEL, "--data", const, "--out", tmp_path / "x.json") == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error: E_DEGENERATE_DATA:")
    bad = tmp_path / "neg.csv"
    bad.write_text("y\n1.0\n-2.0\n3.0\n")
    assert run("fit", "--model", MSCD_MODEL, "--data", bad, "--out", tmp_path / "x.json") == 1
    assert not (tmp_path / "x.json").exists()


def test_module_entry_point(tmp_path):
    env = dict(os.environ, REGIMESWITCH_THREADS="1")
    proc = subprocess.run([sys.executable, "-m", "regimeswitch", "--version"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0 and proc.stdout.strip()
    proc = subprocess.run([sys.executable, "-m", "regimeswitch", "fit"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 2
