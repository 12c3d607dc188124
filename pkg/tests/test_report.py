import json

import pytest

from ncgcn.config import TrainConfig
from ncgcn.data import SbmSpec, gen_sbm
from ncgcn.errors import SchemaError
from ncgcn.report import (block_results, dumps_report, load_report, loads_report, metrics_report,
                          run_block, runs_report, save_report, table_csv)
from ncgcn.trainer import RunResult, run_seeds

FAST = dict(hidden=8, max_epochs=30, patience=10)


@pytest.fixture(scope="module")
def data():
    return gen_sbm(SbmSpec(n=60, C=2, p_in=0.2, p_out=0.02, f=4, seed=1))


@pytest.fixture(scope="module")
def ten_seed_report(data):
    cfg = TrainConfig(**FAST)
    results, _ = run_seeds(cfg, data, range(10))
    return runs_report(cfg, data, [run_block(cfg, results)])


def test_empty_history_round_trip(tmp_path, data):
    r = RunResult(0, 0.5, 0.5, 0, 0, {"low": None, "high": None}, "abc", [], [], {"low": 0.5, "high": 0.5})
    doc = runs_report(TrainConfig(), data, [run_block(TrainConfig(), [r])])
    save_report(doc, tmp_path / "r.json")
    back = load_report(tmp_path / "r.json")
    assert back == doc
    assert block_results(back["blocks"][0])[0] == r


def test_ten_seed_exact_floats(tmp_path, ten_seed_report):
    path = tmp_path / "r.json"
    save_report(ten_seed_report, path)
    back = load_report(path)
    assert back == ten_seed_report
    # a second save of the loaded document is byte-identical (no float drift)
    save_report(back, tmp_path / "r2.json")
    assert path.read_bytes() == (tmp_path / "r2.json").read_bytes()
    losses = [h["loss"] for h in ten_seed_report["blocks"][0]["runs"][3]["history"]]
    assert [h["loss"] for h in back["blocks"][0]["runs"][3]["history"]] == losses
    assert back["schema"] == 1 and back["config"]["patience"] == 10


def test_summary_format(ten_seed_report):
    s = ten_seed_report["blocks"][0]["summary"]
    mean, std = s.split(" ± ")
    assert float(mean) == pytest.approx(100 * ten_seed_report["blocks"][0]["aggregate"]["test_accuracy"]["mean"], abs=0.01)
    assert len(std.split(".")[1]) == 2


def test_corrupt_json():
    with pytest.raises(SchemaError, match="not valid JSON"):
        loads_report('{"schema": 1,')


def test_schema_violation_names_field(ten_seed_report):
    doc = json.loads(json.dumps(ten_seed_report))
    doc["blocks"][0]["runs"][2]["seed"] = "two"
    with pytest.raises(SchemaError, match=r"blocks\[0\]\.runs\[2\]\.seed"):
        loads_report(json.dumps(doc))
    doc = json.loads(json.dumps(ten_seed_report))
    doc["schema"] = 2
    with pytest.raises(SchemaError, match="field schema"):
        loads_report(json.dumps(doc))
    doc = json.loads(json.dumps(ten_seed_report))
    del doc["blocks"][0]["runs"][0]["history"]
    with pytest.raises(SchemaError, match=r"runs\[0\].*history"):
        loads_report(json.dumps(doc))


def test_nonfinite_rejected(data):
    r = RunResult(0, float("nan"), 0.5, 0, 0, {"low": None, "high": None}, "x", [], [], {"low": 0.5, "high": 0.5})
    with pytest.raises(SchemaError, match="non-finite"):
        dumps_report(runs_report(TrainConfig(), data, [run_block(TrainConfig(), [r])]))


def test_missing_report_file(tmp_path):
    with pytest.raises(SchemaError, match="not found"):
        load_report(tmp_path / "none.json")


def test_tables(ten_seed_report):
    deciles = table_csv(ten_seed_report, "deciles").splitlines()
    assert deciles[0] == "variant,seed,metric,bin_lo,bin_hi,count,accuracy,high_proportion"
    assert len(deciles) == 1 + 10 * 2 * 10
    groups = table_csv(ten_seed_report, "groups").splitlines()
    assert len(groups) == 1 + 20
    recall = table_csv(ten_seed_report, "recall").splitlines()
    n_epochs = sum(r["epochs_run"] for r in ten_seed_report["blocks"][0]["runs"])
    assert len(recall) == 1 + n_epochs
    with pytest.raises(SchemaError):
        table_csv(ten_seed_report, "bogus")


def test_metrics_report(data):
    doc = metrics_report(data, 1, 0.5)
    assert loads_report(dumps_report(doc)) == doc
    m = doc["metrics"]
    assert sum(m["nc"]["histogram"]["counts"]) == data.n
    assert 0 <= m["high_nc_proportion"] <= 1
    assert m["nc"]["mean"] <= m["entropy"]["mean"] + 1e-12
    assert table_csv(doc, "groups").splitlines()[0] == "group,proportion"
    with pytest.raises(SchemaError, match="recall"):
        table_csv(doc, "recall")
