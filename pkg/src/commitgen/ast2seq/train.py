"""Teacher-forced training with Adam, early stopping and checkpoint manifests."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff import ParamStore, no_grad, rng_stream
from ..errors import ConfigMismatch, EmptyTrainingSet, MissingArtifact
from ..java.nodes import GRAMMAR_VERSION
from .batching import make_batch
from .decode import beam_search, greedy_decode
from .model import Ast2Seq, ModelConfig

log = logging.getLogger(__name__)


class EarlyStopping:
    """Stop once the monitored loss has not improved for ``patience`` epochs."""

    def __init__(self, patience):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, epoch, value):
        """Record ``value``; returns (improved, should_stop)."""
        if value < self.best:
            self.best, self.best_epoch, self.bad_epochs = value, epoch, 0
            return True, False
        self.bad_epochs += 1
        return False, self.bad_epochs >= self.patience


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    valid_loss: list = field(default_factory=list)
    best_epoch: int = 0
    best_valid_loss: float = math.inf
    epochs_run: int = 0
    stopped_early: bool = False

    def to_json(self):
        return {"train_loss": self.train_loss, "valid_loss": self.valid_loss,
                "best_epoch": self.best_epoch, "best_valid_loss": self.best_valid_loss,
                "epochs_run": self.epochs_run, "stopped_early": self.stopped_early}


@dataclass
class Example:
    """One training commit: its path contexts and normalized message tokens."""
    contexts: object
    message: list


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def dataset_loss(model, examples, vocabs, batch_size):
    """Token-weighted mean cross-entropy over a dataset, eval mode."""
    total = 0.0
    tokens = 0
    with no_grad():
        for start in range(0, len(examples), batch_size):
            chunk = examples[start:start + batch_size]
            batch = _make(model, chunk, vocabs)
            n_tok = int((batch.y_out != 0).sum())
            total += float(model.loss(batch).data) * n_tok
            tokens += n_tok
    return total / max(tokens, 1)


def _make(model, examples, vocabs):
    return make_batch([e.contexts for e in examples], vocabs["subtoken"],
                      [e.message for e in examples], vocabs["target"],
                      model.config.polarity_embeddings)


def train(model, train_set, valid_set, vocabs, epochs=None, on_epoch=None):
    """Train ``model`` in place; the best-validation parameters are restored at the end."""
    if not train_set:
        raise EmptyTrainingSet("no training examples")
    cfg = model.config
    epochs = cfg.epochs if epochs is None else epochs
    batch_rng = rng_stream(cfg.seed, "ast2seq.batches")
    drop_rng = rng_stream(cfg.seed, "ast2seq.dropout")
    stopper = EarlyStopping(cfg.patience)
    report = TrainReport()
    best = model.params.snapshot()
    valid = valid_set or train_set
    # batches are fixed per example set; re-encode per epoch only the order changes
    for epoch in range(1, epochs + 1):
        losses = []
        for idx in _batches(len(train_set), cfg.batch_size, batch_rng):
            batch = _make(model, [train_set[i] for i in idx], vocabs)
            loss = model.loss(batch, training=True, rng=drop_rng)
            loss.backward()
            model.params.adam_step(lr=cfg.lr)
            losses.append(float(loss.data))
        report.train_loss.append(float(np.mean(losses)))
        v = dataset_loss(model, valid, vocabs, cfg.batch_size)
        report.valid_loss.append(v)
        report.epochs_run = epoch
        improved, stop = stopper.update(epoch, v)
        if improved:
            best = model.params.snapshot()
        if on_epoch is not None:
            on_epoch(epoch, report)
        if stop:
            report.stopped_early = True
            break
    model.params.restore(best)
    report.best_epoch = stopper.best_epoch
    report.best_valid_loss = stopper.best
    return report


def generate(model, contexts, vocabs, beam_width=None, max_len=None):
    """Decode one message (token strings) per PathContextSet."""
    cfg = model.config
    beam_width = cfg.beam_width if beam_width is None else beam_width
    max_len = cfg.max_len if max_len is None else max_len
    out = []
    with no_grad():
        for ctx in contexts:
            batch = make_batch([ctx], vocabs["subtoken"], polarity_embeddings=cfg.polarity_embeddings)
            enc = model.encode(batch)
            if beam_width == 1:
                ids = greedy_decode(model, enc, max_len)
            else:
                ids = beam_search(model, enc, beam_width, max_len)
            out.append(vocabs["target"].decode(ids))
    return out


# ---------------------------------------------------------------- persistence

def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_model(model, vocabs, directory, report=None):
    """Write ``ast2seq.ckpt`` plus ``ast2seq.manifest.json`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ckpt = directory / "ast2seq.ckpt"
    model.params.save(ckpt)
    manifest = {"checkpoint": ckpt.name, "checkpoint_sha256": _sha256(ckpt),
                "config": model.config.as_dict(), "grammar": GRAMMAR_VERSION,
                "subtoken_size": model.subtoken_size, "target_size": model.target_size,
                "vocab_sha256": {k: v.digest() for k, v in sorted(vocabs.items())}}
    if report is not None:
        manifest["report"] = report.to_json()
    (directory / "ast2seq.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def load_model(directory, vocabs):
    """Load a checkpoint, refusing vocabularies or files that do not match its manifest."""
    directory = Path(directory)
    mpath = directory / "ast2seq.manifest.json"
    ckpt = directory / "ast2seq.ckpt"
    for p in (mpath, ckpt):
        if not p.exists():
            raise MissingArtifact("generator", str(p))
    manifest = json.loads(mpath.read_text())
    if _sha256(ckpt) != manifest["checkpoint_sha256"]:
        raise ConfigMismatch("generator checkpoint does not match its manifest hash")
    for kind, digest in manifest["vocab_sha256"].items():
        if kind not in vocabs or vocabs[kind].digest() != digest:
            raise ConfigMismatch(f"{kind} vocabulary differs from the one used in training")
    if manifest["grammar"] != GRAMMAR_VERSION:
        raise ConfigMismatch(f"checkpoint grammar {manifest['grammar']} != {GRAMMAR_VERSION}")
    model = Ast2Seq(manifest["subtoken_size"], manifest["target_size"],
                    ModelConfig(**manifest["config"]), init=False)
    model.params = ParamStore.load(ckpt)
    return model
