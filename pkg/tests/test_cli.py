import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from lowrank_bip.cli import EXIT_CHECK, EXIT_INVALID, EXIT_OK, EXIT_USAGE, main, parse_ranks
from lowrank_bip.io import parse_csv, report_rows, save_problem
from lowrank_bip.problems import random_problem
from lowrank_bip.report import report_digest

DATA = Path(__file__).resolve().parents[1] / "data"
SCALAR = str(DATA / "scalar.json")
COORDINATE = str(DATA / "coordinate.json")


def run(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    text = out.read_text() if out.exists() else None
    return code, text


def run_json(argv, tmp_path):
    code, text = run(argv, tmp_path)
    return code, json.loads(text)


@pytest.fixture
def zero_g_file(tmp_path):
    doc = {"schema_version": "1.0", "n": 2, "d": 3, "G": [[0, 0, 0], [0, 0, 0]],
           "C_obs": {"diag": [1, 2]}, "C_pr": {"diag": [3, 2, 1]}}
    path = tmp_path / "zero.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_parse_ranks():
    assert parse_ranks("0..3") == [0, 1, 2, 3]
    assert parse_ranks("2,5") == [2, 5]
    assert parse_ranks("4..4") == [4]
    for bad in ("3..1", "a..b", "1,x"):
        with pytest.raises(Exception):
            parse_ranks(bad)


# --- sweep ---------------------------------------------------------------------------------------


def test_sweep_scalar_rank_one_row_is_zero(tmp_path):
    code, rep = run_json(["sweep", "--problem", SCALAR, "--ranks", "0..1", "--seed", "0",
                          "--loss", "kl", "--loss", "rkl", "--loss", "renyi:0.5"], tmp_path)
    assert code == EXIT_OK
    assert rep["checks"]["passed"]
    row = rep["records"][1]
    assert row["r"] == 1
    for group in ("predicted_cov_loss", "predicted_mean_loss", "joint_loss"):
        assert all(v == 0.0 for v in row[group].values())
    for group in ("achieved_cov_loss", "achieved_bayes_risk", "achieved_joint_loss"):
        assert all(abs(v) <= 1e-20 for v in row[group].values())
    assert rep["records"][0]["predicted_mean_loss"] == {"class1": 1.0, "class2": 1.0}


def test_sweep_zero_forward_map(tmp_path, zero_g_file):
    code, rep = run_json(["sweep", "--problem", zero_g_file, "--seed", "0"], tmp_path)
    assert code == EXIT_OK
    rows = rep["records"]
    assert [row["r"] for row in rows] == [0, 1, 2, 3]
    for row in rows:
        assert {k: v for k, v in row.items() if k != "r"} == {k: v for k, v in rows[0].items() if k != "r"}
        for group in ("predicted_cov_loss", "predicted_mean_loss", "joint_loss"):
            assert all(v == 0.0 for v in row[group].values())


def test_sweep_is_byte_identical(tmp_path):
    argv = ["sweep", "--problem", str(DATA / "coordinate.json"), "--seed", "4", "--mc-samples", "500"]
    _, a = run([*argv, "--no-timestamp"], tmp_path, "a.json")
    _, b = run([*argv, "--no-timestamp", "--workers", "3"], tmp_path, "b.json")
    assert a == b
    _, c = run(argv, tmp_path, "c.json")
    _, d = run(argv, tmp_path, "d.json")
    c, d = json.loads(c), json.loads(d)
    assert c["metadata"]["timestamp"] is not None
    assert c["metadata"]["report_digest"] == d["metadata"]["report_digest"] == json.loads(a)["metadata"]["report_digest"]
    assert report_digest(c) == c["metadata"]["report_digest"]


def test_sweep_seed_changes_mc_columns(tmp_path):
    argv = ["sweep", "--problem", SCALAR, "--mc-samples", "200", "--no-timestamp"]
    _, a = run_json([*argv, "--seed", "1"], tmp_path)
    _, b = run_json([*argv, "--seed", "2"], tmp_path)
    assert a["records"][0]["mc_bayes_risk"] != b["records"][0]["mc_bayes_risk"]
    assert a["records"][0]["predicted_cov_loss"] == b["records"][0]["predicted_cov_loss"]


def test_sweep_csv_matches_json(tmp_path):
    argv = ["sweep", "--problem", COORDINATE, "--seed", "0", "--no-timestamp", "--loss", "kl", "--loss", "renyi:0.25"]
    _, js = run(argv, tmp_path, "r.json")
    _, cs = run([*argv, "--format", "csv"], tmp_path, "r.csv")
    assert report_rows(json.loads(js)) == parse_csv(cs)


def test_sweep_records_metadata(tmp_path):
    _, rep = run_json(["sweep", "--problem", SCALAR, "--seed", "7", "--tol-file", str(DATA / "tolerances.toml")], tmp_path)
    meta = rep["metadata"]
    assert meta["seed"] == 7
    assert meta["input_digest"].startswith("sha256:")
    assert meta["tolerances"]["loss_rtol"] == 1e-8


# --- approx ----------------------------------------------------------------------------------------


def test_approx_cov_rank_zero(tmp_path, zero_g_file):
    code, doc = run_json(["approx", "--problem", zero_g_file, "--target", "cov", "--rank", "0"], tmp_path)
    assert code == EXIT_OK
    assert doc["update"]["base"] == "C_pr"
    assert doc["update"]["rank"] == 0
    assert np.array(doc["update"]["factor"]).size == 0
    assert len(doc["update"]["factor"]) == 3


def test_approx_mean2_scalar(tmp_path):
    _, doc = run_json(["approx", "--problem", SCALAR, "--target", "mean2", "--rank", "1"], tmp_path)
    assert doc["mean_operator"]["matrix"] == [[0.5]]
    assert doc["mean_operator"]["class"] == "class2"
    assert doc["predicted_loss"] == 0.0


def test_approx_joint2_coordinate(tmp_path):
    _, doc = run_json(["approx", "--problem", COORDINATE, "--target", "joint2", "--rank", "1"], tmp_path)
    np.testing.assert_allclose(doc["mean_operator"]["matrix"], [[0.5], [0.0]], atol=1e-15)
    factor = np.array(doc["update"]["factor"])
    np.testing.assert_allclose(np.abs(factor[:, 0]), [np.sqrt(0.5), 0.0], atol=1e-15)
    assert doc["update"]["sign"] == "minus"


def test_approx_prec_and_losses(tmp_path):
    _, doc = run_json(["approx", "--problem", SCALAR, "--target", "prec", "--rank", "0",
                       "--loss", "kl", "--loss", "rkl"], tmp_path)
    assert doc["update"]["sign"] == "plus"
    assert set(doc["predicted_loss"]) == {"kl", "rkl"}
    assert doc["spectrum"]["lambdas"] == [-0.5]


# --- other subcommands -------------------------------------------------------------------------------


def test_solve(tmp_path):
    data = tmp_path / "y.json"
    data.write_text(json.dumps({"y": [1.0]}))
    code, doc = run_json(["solve", "--problem", SCALAR, "--data", str(data)], tmp_path)
    assert code == EXIT_OK
    assert doc["posterior_mean"] == [pytest.approx(0.5)]
    assert doc["posterior_covariance"] == [[pytest.approx(0.5)]]
    data.write_text("[3.0]")
    _, doc = run_json(["solve", "--problem", COORDINATE, "--data", str(data)], tmp_path)
    np.testing.assert_allclose(doc["posterior_mean"], [1.5, 0.0], atol=1e-15)


def test_spectrum(tmp_path):
    code, doc = run_json(["spectrum", "--problem", str(DATA / "deconvolution_d64_n16.json")], tmp_path)
    assert code == EXIT_OK
    assert doc["rank_h"] == 16
    assert max(doc["residuals"].values()) <= 1e-8
    assert any(k.startswith("sqrt_") for k in doc["residuals"])


def test_simulate(tmp_path):
    truth = tmp_path / "x.json"
    truth.write_text(json.dumps({"x_true": [0.0]}))
    golden = json.loads((Path(__file__).parent / "golden" / "simulate_data.json").read_text())
    _, doc = run_json(["simulate", "--problem", SCALAR, "--seed", "0", "--truth", str(truth)], tmp_path)
    assert doc["y"] == golden["y"]
    _, a = run(["simulate", "--problem", COORDINATE, "--seed", "3"], tmp_path, "a.json")
    _, b = run(["simulate", "--problem", COORDINATE, "--seed", "3"], tmp_path, "b.json")
    assert a == b
    assert len(json.loads(a)["x_true"]) == 2


def test_verify_passes(tmp_path):
    code, doc = run_json(["verify", "--problem", COORDINATE, "--seed", "0", "--restarts", "3",
                          "--loss", "kl", "--loss", "renyi:0.5"], tmp_path)
    assert code == EXIT_OK
    assert doc["passed"] and doc["failures"] == []
    assert set(doc["duality"]) == {"0", "1", "2"}


def test_verify_random_problem(tmp_path):
    path = tmp_path / "p.json"
    save_problem(random_problem(3, n=2, d=3), path)
    code, doc = run_json(["verify", "--problem", str(path), "--seed", "1", "--ranks", "0..2"], tmp_path)
    assert code == EXIT_OK, doc["failures"]
    for entry in doc["brute_force"].values():
        assert entry["brute_force"] >= entry["predicted"] - 1e-6


# --- exit codes ------------------------------------------------------------------------------------------


@pytest.fixture
def strict_tolerances(tmp_path):
    path = tmp_path / "strict.toml"
    path.write_text("[tolerances]\nloss_rtol = 0\nloss_atol = 0\nrisk_rtol = 0\nrisk_atol = 0\n")
    return str(path)


@pytest.fixture
def broken_files(tmp_path):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{")
    bad_cov = tmp_path / "neg.json"
    bad_cov.write_text(json.dumps({"schema_version": "1.0", "n": 1, "d": 1, "G": [[1]], "C_obs": [[-1]], "C_pr": [[1]]}))
    bad_tol = tmp_path / "tol.toml"
    bad_tol.write_text("[tolerances]\nnonsense = 1\n")
    return {"json": str(bad_json), "cov": str(bad_cov), "tol": str(bad_tol), "missing": str(tmp_path / "nope.json")}


def test_exit_code_matrix(tmp_path, broken_files, strict_tolerances, capsys):
    deconv = str(DATA / "deconvolution_d64_n16.json")
    cases = [
        ([], EXIT_USAGE),
        (["frobnicate"], EXIT_USAGE),
        (["sweep", "--problem", SCALAR], EXIT_USAGE),
        (["simulate", "--problem", SCALAR], EXIT_USAGE),
        (["verify", "--problem", SCALAR], EXIT_USAGE),
        (["sweep", "--problem", SCALAR, "--seed", "0", "--ranks", "2..1"], EXIT_USAGE),
        (["sweep", "--problem", SCALAR, "--seed", "0", "--loss", "renyi:2"], EXIT_USAGE),
        (["sweep", "--problem", SCALAR, "--seed", "0", "--format", "xml"], EXIT_USAGE),
        (["sweep", "--problem", SCALAR, "--seed", "0", "--mc-samples", "10"], EXIT_USAGE),
        (["approx", "--problem", SCALAR, "--target", "mean3", "--rank", "1"], EXIT_USAGE),
        (["verify", "--problem", SCALAR, "--seed", "0", "--restarts", "0"], EXIT_USAGE),
        (["sweep", "--problem", broken_files["json"], "--seed", "0"], EXIT_INVALID),
        (["sweep", "--problem", broken_files["cov"], "--seed", "0"], EXIT_INVALID),
        (["sweep", "--problem", broken_files["missing"], "--seed", "0"], EXIT_INVALID),
        (["sweep", "--problem", SCALAR, "--seed", "0", "--tol-file", broken_files["tol"]], EXIT_INVALID),
        (["sweep", "--problem", SCALAR, "--seed", "0", "--ranks", "0..2"], EXIT_INVALID),
        (["approx", "--problem", SCALAR, "--target", "cov", "--rank", "5"], EXIT_INVALID),
        (["approx", "--problem", COORDINATE, "--target", "mean2", "--rank", "2"], EXIT_INVALID),
        (["sweep", "--problem", deconv, "--seed", "0", "--tol-file", strict_tolerances], EXIT_CHECK),
    ]
    for argv, expected in cases:
        try:
            code = main(argv)
        except SystemExit as exc:
            code = exc.code
        assert code == expected, argv
    err = capsys.readouterr().err
    assert "C_obs" in err


def test_strict_tolerances_report_lists_failures(tmp_path, strict_tolerances):
    code, rep = run_json(["sweep", "--problem", str(DATA / "deconvolution_d64_n16.json"), "--seed", "0",
                          "--ranks", "0..4", "--tol-file", strict_tolerances], tmp_path)
    assert code == EXIT_CHECK
    assert not rep["checks"]["passed"]
    assert rep["checks"]["failures"]


def test_console_script_and_log_level(tmp_path):
    env = dict(os.environ, LOWRANK_BIP_LOG="INFO")
    out = tmp_path / "s.json"
    proc = subprocess.run(
        [sys.executable, "-m", "lowrank_bip.cli", "sweep", "--problem", SCALAR, "--seed", "0", "--out", str(out)],
        capture_output=True, text=True, env=env,
    )
    assert proc.returncode == 0, proc.stderr
    assert "wrote" in proc.stderr
    assert json.loads(out.read_text())["checks"]["passed"]
    proc = subprocess.run([sys.executable, "-m", "lowrank_bip.cli", "sweep", "--problem", SCALAR],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE
