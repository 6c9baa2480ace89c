import json
import os
from pathlib import Path

import pytest

from seesim import cli
from seesim.clustering import clusters_from_json

from conftest import data_path

MINI = data_path("minisoc.v")
STIM = data_path("minisoc_stim.json")
DB = data_path("faultdb.json")


def run(*args):
    return cli.main([str(a) for a in args])


def test_parse(tmp_path, capsys):
    assert run("parse", data_path("demo5.v")) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["num_cells"] == 5


def test_cluster_two_module(tmp_path):
    out = tmp_path / "c.json"
    assert run("cluster", data_path("two_module.v"), "--kn", 2, "--ln", 1, "--seed", 7, "-o", out) == 0
    clusters, params = clusters_from_json(out.read_text())
    assert params.seed == 7
    assert sorted(c.members for c in clusters) == [[0, 1, 2, 3], [4, 5, 6, 7]]
    manifest = json.loads(Path(f"{out}.manifest.json").read_text())
    assert manifest["inputs"]["netlist"]["sha256"]
    assert "cluster" in manifest["wall_times"]


def test_seed_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SSRESF_SEED", "13")
    out = tmp_path / "c.json"
    assert run("cluster", MINI, "--kn", 3, "--ln", 2, "-o", out) == 0
    assert json.loads(out.read_text())["params"]["seed"] == 13


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    d = tmp_path_factory.mktemp("pipe")
    assert run("cluster", MINI, "--kn", 6, "--ln", 2, "--seed", 3, "-o", d / "clusters.json") == 0
    camp = ["campaign", MINI, "--clusters", d / "clusters.json", "--db", DB, "--stimulus", STIM,
            "--let", 37, "--flux", 4e8, "--area", 1e-3, "--window", 1e-3, "--fraction", 0.4, "--seed", 3,
            "--jobs", 1]
    assert run(*camp, "-o", d / "campaign.json") == 0
    assert run(*camp, "-o", d / "campaign2.json") == 0
    assert run("train", MINI, "--clusters", d / "clusters.json", "--stimulus", STIM, "--campaign",
               d / "campaign.json", "--folds", 3, "--seed", 3, "--jobs", 1, "--out-dir", d / "model") == 0
    assert run("predict", MINI, "--clusters", d / "clusters.json", "--stimulus", STIM, "--campaign",
               d / "campaign.json", "--model", d / "model" / "model.json", "--verify-per-node", 2, "--db", DB,
               "--jobs", 1, "-o", d / "pred.json") == 0
    assert run("report", "--campaign", d / "campaign.json", "--predictions", d / "pred.json", "--modules",
               data_path("minisoc_modules.json"), "--netlist", MINI, "-o", d / "report.json") == 0
    return d


def test_campaign_artifacts(pipeline):
    a = (pipeline / "campaign.json").read_bytes()
    assert a == (pipeline / "campaign2.json").read_bytes()
    doc = json.loads(a)
    assert doc["num_events"] == 400
    assert "Chip SER" in (pipeline / "campaign.txt").read_text()


def test_train_artifacts(pipeline):
    m = pipeline / "model"
    for name in ("model.json", "metrics.json", "feature_curve.csv", "roc.csv"):
        assert (m / name).exists()
    metrics = json.loads((m / "metrics.json").read_text())
    assert len(metrics["selection_curve"]) == 8
    roc_rows = (m / "roc.csv").read_text().splitlines()
    assert roc_rows[0] == "fpr,tpr" and roc_rows[1] == "0.0,0.0"


def test_predict_and_report(pipeline):
    pred = json.loads((pipeline / "pred.json").read_text())
    camp = json.loads((pipeline / "campaign.json").read_text())
    measured = {int(k) for k in camp["nodes"]}
    assert {n["cell"] for n in pred["nodes"]}.isdisjoint(measured)
    assert "verification" in pred
    report = json.loads((pipeline / "report.json").read_text())
    props = report["module_proportions"]
    assert sum(p["share_percent"] for p in props.values()) == pytest.approx(100.0)
    assert "speedup" in report["comparison"]


def test_zero_flux(tmp_path):
    assert run("cluster", data_path("two_module.v"), "--kn", 2, "--ln", 1, "-o", tmp_path / "c.json") == 0
    stim = tmp_path / "s.json"
    stim.write_text(json.dumps({"clock": {"net": "ck", "period": 10, "first_edge": 10},
                                "inputs": {"a": [[0, 1]], "b": [[0, 0]]}, "duration": 50}))
    out = tmp_path / "camp.json"
    assert run("campaign", data_path("two_module.v"), "--clusters", tmp_path / "c.json", "--db", DB,
               "--stimulus", stim, "--let", 37, "--flux", 0, "--area", 1, "--window", 1, "-o", out) == 0
    doc = json.loads(out.read_text())
    assert doc["num_events"] == 0
    assert all(c["ser"] == 0 for c in doc["clusters"])
    assert doc["chip_ser"] == 0
    assert doc["xsect_set"] is None


def test_usage_error(capsys):
    assert run("cluster") == 2
    assert run("frobnicate") == 2


def test_input_error(tmp_path, capsys):
    bad = tmp_path / "bad.v"
    bad.write_text("module top(input a); FOO g(.X(a)); endmodule\n")
    assert run("parse", bad) == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "UnknownMaster" and err["exit_code"] == 3
    assert run("parse", tmp_path / "missing.v") == 3


def test_predict_verify_needs_db(pipeline, capsys):
    d = pipeline
    code = run("predict", MINI, "--clusters", d / "clusters.json", "--stimulus", STIM, "--campaign",
               d / "campaign.json", "--model", d / "model" / "model.json", "--verify-per-node", 2,
               "-o", d / "x.json")
    assert code == 2
    assert json.loads(capsys.readouterr().err)["exit_code"] == 2
