import json

import pytest

from ncgcn.cli import main, parse_seeds, UsageError


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    spec = root / "spec.txt"
    spec.write_text("n = 60\nC = 2\np_in = 0.2\np_out = 0.02\nf = 4\nseed = 1\n")
    assert main(["gen-synth", "--spec", str(spec), "--out", str(root / "b")]) == 0
    cfg = root / "fast.cfg"
    cfg.write_text("hidden = 8\nmax_epochs = 30\npatience = 10\n")
    return root


def test_parse_seeds():
    assert parse_seeds("0..3") == [0, 1, 2, 3]
    assert parse_seeds("4,2") == [4, 2]
    assert parse_seeds("7") == [7]
    with pytest.raises(UsageError):
        parse_seeds("3..1")
    with pytest.raises(UsageError):
        parse_seeds("a..b")


def test_grad_check_seed_7(capsys):
    assert main(["grad-check", "--seed", "7"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_grad_check_failure_exit_code():
    # an impossible tolerance turns the check into a failure
    assert main(["grad-check", "--tol", "0"]) == 1


def test_train_invalid_threshold(bundle, capsys):
    bad = bundle / "bad.cfg"
    bad.write_text("T = 1.5\n")
    assert main(["train", str(bundle / "b"), "--config", str(bad)]) == 2
    assert "(0, 1)" in capsys.readouterr().err


def test_train_writes_report_with_effective_config(bundle):
    out = bundle / "train.json"
    assert main(["train", str(bundle / "b"), "--config", str(bundle / "fast.cfg"),
                 "--seeds", "0..2", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["hidden"] == 8 and doc["config"]["lr"] == 0.01  # default filled in
    assert [r["seed"] for r in doc["blocks"][0]["runs"]] == [0, 1, 2]


def test_train_workers_identical(bundle):
    a, b = bundle / "w1.json", bundle / "w2.json"
    base = ["train", str(bundle / "b"), "--config", str(bundle / "fast.cfg"), "--seeds", "0..3"]
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--workers", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_ablate_four_blocks_shared_splits(bundle):
    out = bundle / "ablate.json"
    assert main(["ablate", str(bundle / "b"), "--config", str(bundle / "fast.cfg"),
                 "--seeds", "0..1", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert [b["variant"] for b in doc["blocks"]] == ["full", "no_separation", "no_message_separation",
                                                    "nh_separation"]
    hashes = [[r["split_hash"] for r in b["runs"]] for b in doc["blocks"]]
    assert all(h == hashes[0] for h in hashes)


def test_metrics_and_report_tables(bundle, capsys):
    out = bundle / "m.json"
    assert main(["metrics", str(bundle / "b"), "--k", "2", "--T", "0.4", "--out", str(out)]) == 0
    assert (bundle / "m.deciles.csv").read_text().startswith("metric,")
    capsys.readouterr()
    assert main(["report", str(out), "--table", "deciles"]) == 0
    assert capsys.readouterr().out.startswith("metric,bin_lo")
    assert main(["report", str(out), "--table", "recall"]) == 2


def test_report_table_from_train(bundle, capsys):
    out = bundle / "t.json"
    main(["train", str(bundle / "b"), "--config", str(bundle / "fast.cfg"), "--seeds", "0", "--out", str(out)])
    capsys.readouterr()
    for table in ("deciles", "groups", "recall"):
        assert main(["report", str(out), "--table", table]) == 0
    assert "high_recall" in capsys.readouterr().out


def test_usage_errors(bundle, tmp_path):
    assert main(["train"]) == 2
    assert main(["train", str(bundle / "b"), "--bogus"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["train", str(tmp_path / "missing")]) == 2
    assert main(["report", str(tmp_path / "missing.json"), "--table", "groups"]) == 2
    assert main(["report", str(bundle / "b" / "meta.json"), "--table", "groups"]) == 2
    assert main(["gen-synth", "--spec", str(tmp_path / "none"), "--out", str(tmp_path / "x")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("learning_rate = 0.1\n")
    assert main(["train", str(bundle / "b"), "--config", str(bad)]) == 2
    assert main(["--help"]) == 0


def test_gen_synth_mixed(tmp_path):
    spec = tmp_path / "mixed.txt"
    spec.write_text("n = 80\nseed = 2\n")
    assert main(["gen-synth", "--mixed", "--spec", str(spec), "--out", str(tmp_path / "m")]) == 0
    assert (tmp_path / "m" / "edges.tsv").exists()
    spec.write_text("p_in = 0.01\np_out = 0.5\n")
    assert main(["gen-synth", "--spec", str(spec), "--out", str(tmp_path / "z")]) == 2
