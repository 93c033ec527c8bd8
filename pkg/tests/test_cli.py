import json

import numpy as np
import pandas as pd
import pytest

from treegarrote.cli import main


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["datagen", "friedman1", "--n", "90", "--seed", "1", "--out", str(d / "train.csv")]) == 0
    assert main(["datagen", "friedman1", "--n", "30", "--seed", "2", "--out", str(d / "test.csv")]) == 0
    return d


def _preds(path):
    return pd.read_csv(path, float_precision="round_trip")["prediction"].to_numpy()


def test_staged_pipeline_equals_run(work):
    w = lambda name: str(work / name)
    forest = ["--trees", "12", "--min-node", "4", "--seed", "7"]
    assert main(["fit", "--data", w("train.csv"), "--target", "y", "--out", w("forest.json"), *forest]) == 0
    assert main(["rules", "extract", "--model", w("forest.json"), "--out", w("rules.json")]) == 0
    assert main(["select", "--rules", w("rules.json"), "--data", w("train.csv"), "--out", w("g.json")]) == 0
    assert main(["predict", "--model", w("g.json"), "--data", w("test.csv"), "--out", w("p1.csv")]) == 0
    assert main(["run", "--data", w("train.csv"), "--target", "y", "--out", w("run.json"), *forest]) == 0
    assert main(["predict", "--model", w("run.json"), "--data", w("test.csv"), "--out", w("p2.csv")]) == 0
    np.testing.assert_allclose(_preds(w("p1.csv")), _preds(w("p2.csv")), rtol=0, atol=1e-12)
    assert main(["predict", "--model", w("forest.json"), "--data", w("test.csv"), "--out", w("p3.csv")]) == 0
    assert _preds(w("p3.csv")).shape == (30,)
    doc = json.loads((work / "rules.json").read_text())
    assert doc["kind"] == "rules" and doc["schema_version"] == 1
    assert {"node_rules", "rules", "groups", "columns"} <= doc.keys()


def test_cv_selection_and_baseline(work):
    w = lambda name: str(work / name)
    if not (work / "rules.json").exists():
        pytest.skip("needs the pipeline artifacts")
    assert main(["select", "--rules", w("rules.json"), "--data", w("train.csv"), "--cv", "--folds", "3",
                 "--grid", "0.5,1", "--out", w("gcv.json")]) == 0
    assert json.loads((work / "gcv.json").read_text())["lambda"] in (0.5, 1.0)
    assert main(["baseline", "rule-lasso", "--rules", w("rules.json"), "--data", w("train.csv"), "--cv",
                 "--folds", "3", "--out", w("lasso.json")]) == 0
    assert main(["predict", "--model", w("lasso.json"), "--data", w("test.csv"), "--out", w("p4.csv")]) == 0
    assert np.isfinite(_preds(w("p4.csv"))).all()


def test_effects_export(work):
    w = lambda name: str(work / name)
    if not (work / "g.json").exists():
        pytest.skip("needs the pipeline artifacts")
    assert main(["effects", "--rules", w("rules.json"), "--model", w("g.json"), "--pairs", "x1,x2",
                 "--out", w("fx")]) == 0
    man = json.loads((work / "fx" / "manifest.json").read_text())
    assert man["pairs"] == [["x1", "x2"]]
    assert main(["effects", "--rules", w("rules.json"), "--pairs", "x1", "--out", w("fx2")]) == 1
    assert main(["effects", "--rules", w("rules.json"), "--pairs", "x1,zz", "--out", w("fx2")]) == 2


def test_bench_command(work, tmp_path):
    out = tmp_path / "b.json"
    rc = main(["bench", "--datasets", "friedman", "--seeds", "1..2", "--trees", "5", "--methods", "fg",
               "--out", str(out)])
    assert rc == 0
    rows = json.loads(out.read_text())["rows"]
    assert [r["seed"] for r in rows] == [1, 2]


@pytest.mark.parametrize("argv", [[], ["fit"], ["frobnicate"], ["fit", "--data", "x.csv", "--target", "y"],
                                  ["bench", "--datasets", "friedman"]])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1


def test_data_and_model_errors_exit_2(work, tmp_path, capsys):
    w = lambda name: str(work / name)
    assert main(["fit", "--data", str(tmp_path / "none.csv"), "--target", "y", "--out", str(tmp_path / "f")]) == 2
    assert main(["fit", "--data", w("train.csv"), "--target", "nope", "--out", str(tmp_path / "f")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 99, "kind": "garrote"}))
    assert main(["predict", "--model", str(bad), "--data", w("test.csv"), "--out", str(tmp_path / "p")]) == 2
    bad.write_text("{not json")
    assert main(["predict", "--model", str(bad), "--data", w("test.csv"), "--out", str(tmp_path / "p")]) == 2
    assert "error" in capsys.readouterr().err
