import csv
import json

import numpy as np
import pytest

from boostcal.cli import main

SYN = ["--synthetic", "gaussians", "--n-samples", "300", "--seed", "2"]


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def trained(tmp_path):
    out = tmp_path / "train"
    assert main(["train", *SYN, "--base", "tree", "--depth", "2",
                 "--rounds", "2,8", "--out", str(out)]) == 0
    return out / "model.json"


def test_train_writes_model(trained):
    obj = json.loads(trained.read_text())
    assert obj["schema_version"] == 1 and obj["method"] == "none"
    assert len(obj["ensemble"]["stages"]) <= 8


@pytest.mark.parametrize("method", ["platt", "isotonic", "logistic"])
def test_calibrate_with_model(tmp_path, trained, method):
    out = tmp_path / "cal"
    assert main(["calibrate", *SYN, "--seed", "5", "--model", str(trained),
                 "--method", method, "--out", str(out)]) == 0
    assert json.loads((out / "model.json").read_text())["method"] == method


def test_calibrate_by_cross_validation(tmp_path):
    out = tmp_path / "cal"
    assert main(["calibrate", *SYN, "--rounds", "4", "--method", "platt",
                 "--out", str(out)]) == 0
    assert "sigmoid" in json.loads((out / "model.json").read_text())["calibrator"]


def test_predict_evaluate_reliability(tmp_path, trained):
    out = tmp_path / "o"
    for cmd in ("predict", "evaluate", "reliability"):
        assert main([cmd, *SYN, "--model", str(trained), "--out", str(out)]) == 0
    preds = _rows(out / "predictions.csv")
    assert len(preds) == 300
    assert all(0.0 <= float(r["probability"]) <= 1.0 for r in preds)
    m = json.loads((out / "metrics.json").read_text())
    assert set(m) >= {"brier", "cross_entropy", "auc"}
    rel = _rows(out / "reliability.csv")
    assert len(rel) == 10 and sum(int(r["count"]) for r in rel) == 300
    assert len(_rows(out / "histogram.csv")) == 20


def test_predict_csv_file(tmp_path, trained):
    rng = np.random.default_rng(0)
    lines = ["a,b,y"] + [f"{x:.3f},{z:.3f},{i % 2}" for i, (x, z) in
                          enumerate(rng.normal(size=(10, 2)))]
    data = tmp_path / "d.csv"
    data.write_text("\n".join(lines) + "\n")
    out = tmp_path / "o"
    assert main(["predict", "--data", str(data), "--label", "y",
                 "--model", str(trained), "--out", str(out)]) == 0
    assert len(_rows(out / "predictions.csv")) == 10


def test_experiment_and_learning_curve(tmp_path):
    out = tmp_path / "x"
    flags = [*SYN, "--n-samples", "500", "--base", "tree", "--depth", "2",
             "--rounds", "2,4", "--trials", "1", "--sizes", "16,32", "--out", str(out)]
    assert main(["experiment", *flags]) == 0
    assert main(["learning-curve", *flags]) == 0
    summary = _rows(out / "summary.csv")
    assert {r["metric"] for r in summary} == {"cross_entropy", "brier", "auc"}
    assert list(summary[0]) == ["dataset", "base", "metric",
                                "RAW", "PLATT", "ISO", "LOGIST", "LOGLOSS"]
    assert {int(r["size"]) for r in _rows(out / "curve.csv")} == {16, 32}


def test_error_reported_as_json(tmp_path, capsys):
    code = main(["predict", *SYN, "--out", str(tmp_path)])
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["command"] == "predict" and "--model" in err["message"]


def test_missing_file_error(tmp_path, capsys):
    code = main(["train", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path)])
    assert code == 2
    assert json.loads(capsys.readouterr().err)["error"]


def test_corrupt_model_error(tmp_path, capsys):
    bad = tmp_path / "m.json"
    bad.write_text("garbage")
    assert main(["evaluate", *SYN, "--model", str(bad), "--out", str(tmp_path)]) == 2
    assert "corrupt" in json.loads(capsys.readouterr().err)["message"]
