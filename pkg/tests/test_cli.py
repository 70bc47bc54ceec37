import csv
import json
import shutil

import pytest

from commitgen.cli import Layout, emit_table, evaluate_predictions, main
from commitgen.plotting import METRIC_LABELS
from pipeline import FAST, run, run_pipeline

METRICS = ("bleu1", "bleu2", "bleu3", "bleu4", "rouge_l", "meteor")


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    codes = run_pipeline(root)
    return root, codes


def test_every_stage_succeeds(toy_run):
    _, codes = toy_run
    assert all(code == 0 for code in codes.values()), codes


def test_artifacts_exist(toy_run):
    root, _ = toy_run
    lay = Layout(root)
    for path in (lay.commits, lay.features, lay.ingest_report, lay.split, lay.vocabs,
                 lay.gen / "ast2seq.ckpt", lay.gen / "ast2seq.manifest.json", lay.gen / "loss.png",
                 lay.index, lay.index_dir / "retrieved.jsonl", lay.rank / "ranker.ckpt",
                 lay.rank / "ranker.manifest.json", lay.rank / "loss.png", lay.predictions,
                 lay.predict_manifest, lay.eval / "report.json", lay.eval / "metrics.png",
                 lay.eval / "mixture.png", lay.eval / "per_sample.csv"):
        assert path.exists(), path
    # the config is echoed into every artifact directory
    for d in (lay.data, lay.gen, lay.index_dir, lay.rank, lay.predict, lay.eval):
        assert (d / "config.json").exists()


def test_split_is_disjoint_and_covering(toy_run):
    root, _ = toy_run
    lay = Layout(root)
    ids = json.loads(lay.split.read_text())
    kept = [json.loads(line)["commit_id"] for line in lay.commits.read_text().splitlines()]
    flat = ids["train"] + ids["valid"] + ids["test"]
    assert sorted(flat) == sorted(kept) and len(set(flat)) == len(flat)
    report = json.loads(lay.ingest_report.read_text())
    assert report["kept"] == len(kept) and set(report["dropped"]) >= {"chunks", "length", "context"}


def test_predictions_and_report(toy_run):
    root, _ = toy_run
    lay = Layout(root)
    rows = [json.loads(line) for line in lay.predictions.read_text().splitlines()]
    test_ids = json.loads(lay.split.read_text())["test"]
    assert [r["commit_id"] for r in rows] == test_ids
    for r in rows:
        assert r["chosen"] in ("generated", "retrieved")
        assert r["message"] == (r["msg_g"] if r["chosen"] == "generated" else r["msg_t"])
    report = json.loads((lay.eval / "report.json").read_text())
    assert set(report["systems"]) == {"retrieved", "generated", "hybrid"}
    for vals in report["systems"].values():
        assert set(vals) == set(METRICS) and all(0 <= v <= 100 for v in vals.values())
    assert sum(report["mixture"].values()) == pytest.approx(1.0)
    with open(lay.eval / "per_sample.csv", newline="") as fh:
        assert len(list(csv.reader(fh))) == len(rows) + 1


def test_generate_output_is_tab_delimited(toy_run, capsys):
    root, _ = toy_run
    assert run(root, "evaluate") == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0].split("\t") == ["system", *METRICS]
    assert len(out[1].split("\t")) == 7


def test_evaluate_refuses_mismatched_vocab(toy_run, tmp_path):
    root, _ = toy_run
    copy = tmp_path / "copy"
    shutil.copytree(root, copy)
    lay = Layout(copy)
    vocabs = json.loads(lay.vocabs.read_text())
    vocabs["target"]["tokens"].append("intruder")
    lay.vocabs.write_text(json.dumps(vocabs))
    assert run(copy, "evaluate") == 2


def test_evaluate_refuses_edited_predictions(toy_run, tmp_path):
    root, _ = toy_run
    copy = tmp_path / "copy"
    shutil.copytree(root, copy)
    lay = Layout(copy)
    lay.predictions.write_text(lay.predictions.read_text().replace("retrieved", "generated", 1))
    assert run(copy, "evaluate") == 2


def test_generate_without_ranker_is_missing_artifact(toy_run, tmp_path, capsys):
    root, _ = toy_run
    copy = tmp_path / "copy"
    shutil.copytree(root, copy)
    (Layout(copy).rank / "ranker.ckpt").unlink()
    assert run(copy, "generate") == 4
    assert "ranker" in capsys.readouterr().err


def test_missing_generator_before_training(tmp_path, capsys):
    codes = run_pipeline(tmp_path, stages=("ingest", "split", "retrieve", "train-rank"))
    assert codes["train-rank"] == 4
    assert "generator" in capsys.readouterr().err


def test_config_and_data_errors(tmp_path):
    assert run(tmp_path, "split", sets=["model.bogus=1"]) == 2
    assert run(tmp_path, "split", sets=["split.strategy=by_author"]) == 2
    assert run(tmp_path, "ingest", sets=()) == 2  # no dataset given
    assert main(["split", "--out", str(tmp_path), "--workers", "0"]) == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"commit_id": "x"}\n')
    assert run(tmp_path, "ingest", "--input", str(bad)) == 3
    assert run(tmp_path, "ingest", "--input", str(tmp_path / "absent.jsonl")) == 4


def test_parallel_ingest_matches_serial(tmp_path):
    data = tmp_path / "toy.jsonl"
    assert run(tmp_path, "make-toy", "--output", str(data), "--n", "12") == 0
    assert run(tmp_path / "a", "ingest", "--input", str(data)) == 0
    assert main(["ingest", "--input", str(data), "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    a = (Layout(tmp_path / "a").features).read_bytes()
    b = (Layout(tmp_path / "b").features).read_bytes()
    assert a == b


def test_evaluate_predictions_mixture_and_modes():
    rows = [{"commit_id": "a", "msg_t": ["x", "y"], "msg_g": ["x", "z"], "message": ["x", "z"],
             "chosen": "generated"},
            {"commit_id": "b", "msg_t": ["p"], "msg_g": [], "message": ["p"], "chosen": "retrieved"}]
    refs = {"a": ["x", "z"], "b": ["p"]}
    rep = evaluate_predictions(rows, refs)
    assert rep["mixture"] == {"generated": 0.5, "retrieved": 0.5}
    assert rep["systems"]["hybrid"]["bleu4"] == pytest.approx(100.0)
    assert rep["systems"]["generated"]["bleu4"] == pytest.approx(50.0)
    pooled = evaluate_predictions(rows, refs, "corpus")
    assert pooled["bleu_mode"] == "corpus"
    assert pooled["systems"]["hybrid"]["bleu1"] == pytest.approx(100.0)


def test_emit_table_format(capsys):
    emit_table(["a", "b"], [["x y", 1.5]])
    assert capsys.readouterr().out == "a\tb\nx y\t1.5\n"


def test_pathstats_table(tmp_path, capsys):
    sets = FAST + ("model.epochs=3",)
    codes = run_pipeline(tmp_path, sets=sets, n=24, extra_statements=3, stages=("ingest", "split"))
    assert codes["split"] == 0
    capsys.readouterr()
    assert run(tmp_path, "pathstats", "--caps", "30", "80", sets=sets) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].split("\t") == ["# Path", *METRIC_LABELS]
    caps = [line.split("\t")[0] for line in lines[1:]]
    assert [c.rstrip("*") for c in caps] == ["30", "80"] and sum(c.endswith("*") for c in caps) == 1
    table = json.loads((Layout(tmp_path).pathstats / "table.json").read_text())
    assert [r["cap"] for r in table["rows"]] == [30, 80]
    assert table["rows"][0]["mean_added_paths"] <= 30 < table["rows"][1]["mean_added_paths"]
    assert (Layout(tmp_path).pathstats / "pathstats.png").exists()
