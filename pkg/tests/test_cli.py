"""Command-line workflow on a small configuration, plus error exits."""
import json

import pytest

from mipreduce.cli import (EXIT_CONFIG, EXIT_DATA, EXIT_SOLVE, EXIT_TRAIN, main)

SMALL = {
    "seed": 3,
    "generation": {"p_min": 2, "p_max": 3, "n_levels": 2, "replicates": 2,
                   "split": [0.5, 0.25, 0.25]},
    "hpo": {"maxiter": 1, "space": {
        "hidden_layers": {"lower": 1, "upper": 2, "kind": "integer"},
        "neurons": {"lower": 8, "upper": 16, "kind": "integer"},
        "learning_rate": {"lower": 1e-3, "upper": 1e-1, "scale": "log10"},
        "epochs": {"lower": 10, "upper": 30, "kind": "integer"},
    }},
    "k_prob": 0.3,
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    (d / "run.json").write_text(json.dumps(SMALL))
    assert main(["gen-data", "--config", str(d / "run.json")]) == 0
    return d


def test_gen_data_writes_dataset(workdir, capsys):
    text = (workdir / "dataset.csv").read_text()
    assert text.startswith("# mipreduce-dataset/1")
    assert len(text.splitlines()) == 2 + 12


def test_full_workflow(workdir, capsys):
    cfg = str(workdir / "run.json")
    assert main(["tune", "--config", cfg]) == 0
    theta = json.loads((workdir / "theta.json").read_text())
    assert theta["architecture"] == "ann" and theta["evaluations"] == 6
    assert main(["train", "--config", cfg]) == 0
    assert (workdir / "model.json").exists()
    assert main(["evaluate", "--config", cfg, "--split", "validation"]) == 0
    for name in ("metrics_validation.json", "metrics_validation.csv", "mlcm_validation.csv",
                 "mlcm_validation_normalized.csv"):
        assert (workdir / "reports" / name).exists()
    out = capsys.readouterr().out
    assert "sample-level accuracy (%)" in out
    assert main(["solve", "--config", cfg, "--compare-full"]) == 0
    rdir = workdir / "reports" / "solve_k0.3_reduce"
    assert (rdir / "summary.csv").exists() and (rdir / "timings.csv").exists()
    (workdir / "demand.csv").write_text("p,c,t\n1,1,2\n2,2,3\n")
    assert main(["solve", "--config", cfg, "--instance", str(workdir / "demand.csv"),
                 "--mode", "fix", "--k-prob", "0.01"]) == 0
    assert (workdir / "reports" / "solve_k0.01_fix" / "demand.json").exists()


def test_config_errors(tmp_path, capsys):
    assert main(["tune", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    (tmp_path / "bad.json").write_text(json.dumps({"sede": 1}))
    assert main(["tune", "--config", str(tmp_path / "bad.json")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "error [config]" in err and "sede" in err
    (tmp_path / "p.json").write_text(json.dumps({"parameters": "nowhere.json"}))
    assert main(["gen-data", "--config", str(tmp_path / "p.json")]) == EXIT_CONFIG


def test_missing_inputs(tmp_path, capsys):
    (tmp_path / "run.json").write_text("{}")
    cfg = str(tmp_path / "run.json")
    assert main(["tune", "--config", cfg]) == EXIT_DATA
    assert "gen-data" in capsys.readouterr().err
    assert main(["solve", "--config", cfg]) == EXIT_SOLVE


def test_train_without_hyperparameters(workdir, tmp_path, capsys):
    doc = dict(SMALL, paths={"dataset": str(workdir / "dataset.csv"),
                             "theta": str(tmp_path / "none.json")})
    (tmp_path / "run.json").write_text(json.dumps(doc))
    assert main(["train", "--config", str(tmp_path / "run.json")]) == EXIT_TRAIN
    assert "missing hyperparameters" in capsys.readouterr().err
