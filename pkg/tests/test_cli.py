"""CLI subcommands end to end on a small synthetic dataset."""

import json

import pytest

from side.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Synthetic inputs plus a small config shared by the command tests."""
    root = tmp_path_factory.mktemp("cliws")
    data = root / "data"
    code = main(
        [
            "synth",
            "--out",
            str(data),
            "--seed",
            "5",
            "--weeks",
            "120",
            "--docs-per-week",
            "6",
            "--lead",
            "2",
        ]
    )
    assert code == 0
    cfg = {
        "seed": 5,
        "state": "synth",
        "backend": "lexicon",
        "paths": {
            "dsci": str(data / "dsci.csv"),
            "social": str(data / "posts.jsonl"),
            "news": str(data / "news.jsonl"),
            "entities": str(data / "entities.txt"),
            "lexicon": None,
            "out_dir": str(root / "run"),
        },
        "windows": {"lookback": 16, "horizon": 3},
        "dsiq": {"topic_count": 12},
        "model": {"width": 8, "hidden": 16},
        "train": {"max_epochs": 3, "patience": 3, "batch_size": 16, "learning_rate": 0.003},
    }
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(cfg), encoding="utf-8")
    return {"root": root, "data": data, "config": cfg_path, "run": root / "run", "raw": cfg}


def test_synth_deterministic(tmp_path):
    for sub in ("a", "b"):
        assert main(["synth", "--out", str(tmp_path / sub), "--seed", "3", "--weeks", "20"]) == 0
    for name in ("dsci.csv", "posts.jsonl", "news.jsonl", "entities.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_quantify_writes_impact_and_topics(workspace):
    assert main(["quantify", "--config", str(workspace["config"])]) == 0
    impact = workspace["run"] / "synth_impact.csv"
    lines = impact.read_text().splitlines()
    assert lines[0].split(",")[0] == "timestep"
    assert len(lines[0].split(",")) == 23
    assert len(lines) - 1 == 120  # one row per week
    topics = (workspace["run"] / "synth_topics.csv").read_text().splitlines()
    assert topics[0] == "source,cluster_id,determinant,doc_count,keywords"
    assert any(line.startswith("social,") for line in topics[1:])
    assert any(line.startswith("news,") for line in topics[1:])


def test_quantify_rerun_byte_identical(workspace):
    impact = workspace["run"] / "synth_impact.csv"
    first = impact.read_bytes()
    assert main(["quantify", "--config", str(workspace["config"])]) == 0
    assert impact.read_bytes() == first


def test_train_then_evaluate_and_determinism(workspace):
    cfg = str(workspace["config"])
    assert main(["train", "--config", cfg]) == 0
    checkpoint = workspace["run"] / "synth_checkpoint.json"
    history = workspace["run"] / "synth_history.csv"
    assert checkpoint.exists() and history.exists()
    assert history.read_text().splitlines()[0] == "epoch,train_loss,val_loss,lr"

    assert main(["evaluate", "--config", cfg]) == 0
    metrics = workspace["run"] / "synth_metrics.csv"
    first = metrics.read_bytes()
    rows = metrics.read_text().splitlines()
    assert rows[0] == "variant,target,MAE,MSE,RMSE,MFA"
    variants = {line.split(",")[0] for line in rows[1:]}
    assert variants == {"full", "persistence", "linear_ar"}

    # same config and seed: retrain + re-evaluate must be byte-identical
    assert main(["train", "--config", cfg]) == 0
    assert main(["evaluate", "--config", cfg]) == 0
    assert metrics.read_bytes() == first


def test_predictions_and_export_plots_pass_through(workspace):
    run = workspace["run"]
    predictions = run / "synth_predictions.csv"
    assert predictions.exists()
    assert main(["export-plots", "--run", str(run), "--state", "synth"]) == 0

    severity = (run / "synth_plot_severity.csv").read_text().splitlines()
    assert severity[0] == "start,step,timestep,actual,predicted"
    pred_rows = predictions.read_text().splitlines()[1:]
    assert len(severity) - 1 == len(pred_rows)  # every test window step
    # pass-through: first data row equals the predictions file columns
    first_pred = pred_rows[0].split(",")
    assert severity[1].split(",") == first_pred[:5]

    bars = (run / "synth_plot_determinants.csv").read_text().splitlines()
    assert bars[0] == "source,determinant,predicted,actual"
    assert len(bars) - 1 == 22


def test_ablate_writes_four_variants(workspace, tmp_path):
    raw = dict(workspace["raw"])
    raw["paths"] = dict(raw["paths"])
    raw["paths"]["out_dir"] = str(workspace["run"])  # reuse the impact csv
    raw["train"] = dict(raw["train"], max_epochs=1, patience=1)
    cfg_path = tmp_path / "ablate.json"
    cfg_path.write_text(json.dumps(raw), encoding="utf-8")
    assert main(["ablate", "--config", str(cfg_path)]) == 0
    rows = (workspace["run"] / "synth_metrics.csv").read_text().splitlines()[1:]
    variants = {line.split(",")[0] for line in rows}
    assert variants == {"full", "no_social", "no_news", "no_attention"}
    targets = {line.split(",")[1] for line in rows if line.startswith("full,")}
    per_target = {}
    for line in rows:
        variant, target = line.split(",")[:2]
        per_target.setdefault(target, set()).add(variant)
    assert all(len(v) == 4 for v in per_target.values())
    assert "severity" in targets


def test_missing_input_exits_2(tmp_path):
    cfg = {
        "paths": {
            "dsci": str(tmp_path / "absent.csv"),
            "social": str(tmp_path / "absent.jsonl"),
            "news": str(tmp_path / "absent.jsonl"),
            "entities": str(tmp_path / "absent.txt"),
            "out_dir": str(tmp_path / "run"),
        }
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    assert main(["quantify", "--config", str(path)]) == 2


def test_bad_config_exits_2(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"unknown_key": 1}), encoding="utf-8")
    assert main(["train", "--config", str(path)]) == 2


def test_missing_run_dir_export_exits_2(tmp_path):
    assert main(["export-plots", "--run", str(tmp_path), "--state", "synth"]) == 2


def test_seed_override_changes_outputs(workspace, tmp_path):
    raw = dict(workspace["raw"])
    raw["paths"] = dict(raw["paths"])
    raw["paths"]["out_dir"] = str(tmp_path / "run2")
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps(raw), encoding="utf-8")
    assert main(["quantify", "--config", str(cfg_path)]) == 0
    assert main(["train", "--config", str(cfg_path), "--seed", "11"]) == 0
    hist_11 = (tmp_path / "run2" / "synth_history.csv").read_bytes()
    assert main(["train", "--config", str(cfg_path), "--seed", "12"]) == 0
    assert (tmp_path / "run2" / "synth_history.csv").read_bytes() != hist_11


def test_divergence_exits_3_and_saves_last_good_checkpoint(workspace, tmp_path):
    import numpy as np

    raw = dict(workspace["raw"])
    raw["paths"] = dict(raw["paths"], out_dir=str(tmp_path / "run3"))
    raw["train"] = dict(raw["train"], learning_rate=1e200)
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps(raw), encoding="utf-8")
    # reuse the existing impact csv by pointing out_dir at a copy
    import shutil

    (tmp_path / "run3").mkdir()
    shutil.copy(workspace["run"] / "synth_impact.csv", tmp_path / "run3" / "synth_impact.csv")
    with np.errstate(all="ignore"):
        assert main(["train", "--config", str(cfg_path)]) == 3
    assert (tmp_path / "run3" / "synth_checkpoint.json").exists()


def test_lexicon_backend_makes_no_network_calls(workspace, tmp_path, monkeypatch):
    import requests

    def boom(*args, **kwargs):
        raise AssertionError("network call attempted with lexicon backend")

    monkeypatch.setattr(requests.Session, "post", boom)
    monkeypatch.setattr(requests.Session, "request", boom)
    raw = dict(workspace["raw"])
    raw["paths"] = dict(raw["paths"], out_dir=str(tmp_path / "run4"))
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps(raw), encoding="utf-8")
    assert main(["quantify", "--config", str(cfg_path), "--backend", "lexicon"]) == 0
