import json

import pytest

from commitgen.config import PRESETS, PipelineConfig, from_dict, load_config, parse_override
from commitgen.errors import ConfigError


def test_defaults_and_seed_propagation():
    cfg = load_config()
    assert cfg.model.embed_dim == 128 and cfg.model.hidden_dim == 256
    assert cfg.model.dropout == 0.4 and cfg.model.lr == 1e-4 and cfg.model.patience == 20
    assert cfg.model.beam_width == 5 and cfg.model.batch_size == 16
    assert cfg.features.max_paths == 80
    cfg = load_config(overrides=["seed=7"])
    assert cfg.model.seed == 7 and cfg.ranker.seed == 7


def test_paper_preset():
    cfg = load_config(preset="paper")
    assert cfg.model.batch_size == 256 and cfg.model.epochs == 3000 and cfg.ranker.lr == 1e-4
    assert set(PRESETS) == {"desk", "paper"}


def test_precedence_preset_file_override(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": {"epochs": 42, "dropout": 0.1}, "seed": 3}))
    cfg = load_config(path, ["model.epochs=7"], preset="paper")
    assert cfg.model.epochs == 7 and cfg.model.dropout == 0.1 and cfg.model.batch_size == 256
    assert cfg.seed == 3


def test_parse_override_values():
    assert parse_override("a.b=3") == {"a": {"b": 3}}
    assert parse_override("eval.path_caps=[10,20]") == {"eval": {"path_caps": [10, 20]}}
    assert parse_override("dataset=foo.jsonl") == {"dataset": "foo.jsonl"}
    for bad in ("novalue", "a..b=1"):
        with pytest.raises(ConfigError):
            parse_override(bad)


@pytest.mark.parametrize("values", [
    {"bogus": 1},
    {"model": {"bogus": 1}},
    {"model": {"seed": 5}},
    {"ranker": {"seed": 5}},
    {"split": {"strategy": "by_author"}},
    {"eval": {"bleu_mode": "weird"}},
    {"model": 3},
    {"seed": "x"},
])
def test_invalid_configs(values):
    with pytest.raises(ConfigError):
        from_dict(values)


def test_missing_or_bad_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(preset="gpu")


def test_roundtrip_and_digest(tmp_path):
    cfg = load_config(overrides=["model.epochs=9", "eval.path_caps=[5,10]"])
    assert cfg.eval.path_caps == (5, 10)
    again = from_dict(json.loads(cfg.to_json()))
    assert again == cfg and again.digest() == cfg.digest()
    assert load_config(overrides=["model.epochs=10"]).digest() != cfg.digest()
    cfg.write(tmp_path)
    assert json.loads((tmp_path / "config.json").read_text()) == json.loads(cfg.to_json())
    assert "seed" not in cfg.to_dict()["model"]


def test_direct_construction_syncs_seeds():
    cfg = PipelineConfig(seed=11)
    assert cfg.model.seed == 11 and cfg.ranker.seed == 11
