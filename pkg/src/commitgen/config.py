"""Pipeline configuration: presets, JSON files and dotted ``key=value`` overrides."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

from .ast2seq.model import ModelConfig
from .astpaths import MAX_PATH_NODES, MAX_PATHS
from .errors import ConfigError
from .preprocess import MIN_FREQ, SplitSpec
from .ranker import RankerConfig


@dataclass
class SplitConfig:
    strategy: str = "by_commit"
    fractions: tuple = (0.8, 0.1, 0.1)

    def __post_init__(self):
        self.spec(0)  # validates strategy and fractions

    def spec(self, seed):
        return SplitSpec(self.strategy, tuple(self.fractions), seed)


@dataclass
class FeatureConfig:
    max_paths: int = MAX_PATHS
    max_path_nodes: int = MAX_PATH_NODES
    min_freq: int = MIN_FREQ


@dataclass
class EvalConfig:
    bleu_mode: str = "sentence_avg"
    path_caps: tuple = (30, 80)


@dataclass
class PipelineConfig:
    dataset: str = ""
    out_dir: str = "run"
    seed: int = 0
    split: SplitConfig = field(default_factory=SplitConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    ranker: RankerConfig = field(default_factory=RankerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        # the master seed drives every component
        self.model.seed = self.seed
        self.ranker.seed = self.seed

    def to_dict(self):
        out = asdict(self)
        out["model"].pop("seed")
        out["ranker"].pop("seed")
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def write(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "config.json").write_text(self.to_json())


PRESETS = {
    "desk": {},
    "paper": {"model": {"batch_size": 256, "epochs": 3000},
              "ranker": {"lr": 1e-4}},
}

_SECTIONS = {"split": SplitConfig, "features": FeatureConfig, "model": ModelConfig,
             "ranker": RankerConfig, "eval": EvalConfig}


def _merge(base, update, where=""):
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value, f"{where}{key}.")
        else:
            base[key] = value


def _build_section(cls, values, name):
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {', '.join(unknown)}")
    if "seed" in values:
        raise ConfigError(f"{name}.seed is derived; set the top-level 'seed' instead")
    kwargs = {}
    for key, value in values.items():
        default = known[key].default
        if isinstance(default, tuple) and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name} section: {exc}") from exc


def from_dict(values):
    values = copy.deepcopy(values)
    top = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(values) - top)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    kwargs = {}
    for key, value in values.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            kwargs[key] = _build_section(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    try:
        cfg = PipelineConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if not isinstance(cfg.seed, int):
        raise ConfigError("seed must be an integer")
    if cfg.eval.bleu_mode not in ("sentence_avg", "corpus"):
        raise ConfigError(f"unknown eval.bleu_mode {cfg.eval.bleu_mode!r}")
    return cfg


def parse_override(text):
    """``a.b=value`` -> ({"a": {"b": value}}); values parse as JSON, else as strings."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(f"override key {key!r} is malformed")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    out = value
    for part in reversed(parts):
        out = {part: out}
    return out


def _plain(obj):
    return asdict(obj) if is_dataclass(obj) else obj


def load_config(path=None, overrides=(), preset="desk"):
    """Preset, then JSON file, then overrides, in that order of precedence."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    values = PipelineConfig().to_dict()
    _merge(values, copy.deepcopy(PRESETS[preset]))
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        _merge(values, data)
    for text in overrides:
        _merge(values, parse_override(text))
    return from_dict(_plain(values))
