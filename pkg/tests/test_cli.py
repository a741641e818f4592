"""Command-line flow: simulate -> build-eras -> fit -> pm -> evaluate -> report."""
from __future__ import annotations

import json

import pytest

from drugshift.cli import main

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def run(argv):
    return main(argv)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One full CLI run shared by the checks below."""
    root = tmp_path_factory.mktemp("cli")
    sim = root / "sim"
    fitdir = root / "fit"
    pmdir = root / "pm"
    evaldir = root / "eval"

    assert run([
        "simulate", "--out", str(sim), "--seed", "33", "--patients", "80",
        "--drugs", "4", "--effect", "0=-6", "--noise-sd", "0.5",
        "--span-days", "1461",
    ]) == 0

    rx = sim / "prescriptions.csv"
    meas = sim / "measurements.csv"

    assert run([
        "build-eras", "--prescriptions", str(rx), "--measurements", str(meas),
        "--era-mode", "cdm30", "--out", str(root / "eras"),
    ]) == 0

    assert run([
        "fit", "--prescriptions", str(rx), "--measurements", str(meas),
        "--model", "csccs", "--era-params", str(root / "eras" / "era-params.json"),
        "--lambda", "0", "--min-count", "1", "--out", str(fitdir),
    ]) == 0

    assert run([
        "pm", "--prescriptions", str(rx), "--measurements", str(meas),
        "--out", str(pmdir),
    ]) == 0

    labels = root / "labels.csv"
    labels.write_text("drug,label\ndrug_000,decrease\n")

    assert run([
        "evaluate",
        "--scores", f"csccs={fitdir / 'coefficients.tsv'}",
        "--scores", f"pm={pmdir / 'coefficients.tsv'}",
        "--labels", str(labels), "--k", "2,10",
        "--out", str(evaldir),
    ]) == 0

    # Give the report directory everything it can render.
    (evaldir / "coefficients.tsv").write_bytes(
        (fitdir / "coefficients.tsv").read_bytes()
    )
    (evaldir / "era-params.json").write_bytes(
        (root / "eras" / "era-params.json").read_bytes()
    )
    assert run(["report", "--run-dir", str(evaldir)]) == 0
    return root


def test_simulate_outputs(workspace):
    sim = workspace / "sim"
    for name in ("prescriptions.csv", "measurements.csv", "truth.json"):
        assert (sim / name).stat().st_size > 0
    truth = json.loads((sim / "truth.json").read_text())
    assert truth["effects"] == {"drug_000": -6.0}


def test_effective_config_echo(workspace):
    echo = json.loads((workspace / "sim" / "effective-config.json").read_text())
    sim = echo["simulate"]
    assert sim["seed"] == 33
    assert sim["patients"] == 80
    assert sim["effects"] == {"0": -6.0}
    # Output location and parallelism never appear in the echo.
    for key in ("out", "config", "threads"):
        assert key not in sim


def test_build_eras_outputs(workspace):
    eras_dir = workspace / "eras"
    text = (eras_dir / "eras.csv").read_text().splitlines()
    assert text[0] == "patient_id,drug,start_date,end_date"
    assert len(text) > 1
    params = json.loads((eras_dir / "era-params.json").read_text())
    assert params["mode"] == "cdm30"


def test_fit_outputs(workspace):
    fitdir = workspace / "fit"
    lines = (fitdir / "coefficients.tsv").read_text().splitlines()
    assert lines[0] == "drug\tcount\tscore\trank"
    metrics = json.loads((fitdir / "metrics.json").read_text())
    fit_info = metrics["fit-csccs"]
    assert fit_info["lambda"] == 0.0
    assert fit_info["kkt_violation"] <= 1e-8
    scores = {}
    for line in lines[1:]:
        drug, count, score, rank = line.split("\t")
        scores[drug] = float(score)
    assert scores["drug_000"] < -4.0


def test_evaluate_outputs(workspace):
    evaldir = workspace / "eval"
    metrics = json.loads((evaldir / "metrics.json").read_text())
    ev = metrics["evaluation"]
    assert set(ev) == {"csccs", "pm"}
    assert ev["csccs"]["auroc"] == 1.0
    assert "2" in ev["csccs"]["precision_at_k"] or 2 in ev["csccs"]["precision_at_k"]
    roc = (evaldir / "roc.csv").read_text().splitlines()
    assert roc[0] == "method,fpr,tpr"


def test_report_renders_figures(workspace):
    evaldir = workspace / "eval"
    for name in ("roc.png", "precision.png", "coefficients.png", "changepoints.png"):
        path = evaldir / name
        if name == "changepoints.png":
            # cdm30 mode carries no break fits, so this figure is optional.
            continue
        assert path.exists(), name
        assert path.read_bytes()[:8] == PNG_MAGIC


def test_lambda_and_target_support_conflict(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run([
            "fit", "--prescriptions", "x.csv", "--measurements", "y.csv",
            "--out", str(tmp_path), "--lambda", "1", "--target-support", "5",
        ])
    assert exc.value.code == 2


def test_missing_input_file_is_clean_error(tmp_path, capsys):
    code = run([
        "fit", "--prescriptions", str(tmp_path / "absent.csv"),
        "--measurements", str(tmp_path / "also-absent.csv"),
        "--out", str(tmp_path / "out"), "--lambda", "0",
    ])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_report_requires_directory(tmp_path):
    code = run(["report", "--run-dir", str(tmp_path / "nope")])
    assert code == 1


def test_report_empty_directory_errors(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    code = run(["report", "--run-dir", str(empty)])
    assert code == 1


def test_config_file_precedence(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"seed": 5, "patients": 12, "drugs": 2}))
    out = tmp_path / "sim"
    assert run([
        "simulate", "--config", str(config), "--out", str(out), "--seed", "9",
    ]) == 0
    echo = json.loads((out / "effective-config.json").read_text())
    assert echo["simulate"]["seed"] == 9  # flag beats config file
    assert echo["simulate"]["patients"] == 12  # config beats default


def test_config_file_unknown_key(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"seeed": 5}))
    code = run(["simulate", "--config", str(config), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "seeed" in capsys.readouterr().err


def test_same_seed_same_bytes(tmp_path):
    args = ["simulate", "--seed", "44", "--patients", "10", "--drugs", "2"]
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert run(args + ["--out", str(a)]) == 0
    assert run(args + ["--out", str(b)]) == 0
    for name in ("prescriptions.csv", "measurements.csv", "truth.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
