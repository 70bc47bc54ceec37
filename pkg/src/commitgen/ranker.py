"""ConvNet relevance ranking over a diff/message matching matrix."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from . import autodiff as ad
from .ast2seq.train import EarlyStopping
from .autodiff import ParamStore, Tensor, no_grad, rng_stream, xavier_uniform
from .errors import (CommitGenError, ConfigMismatch, EmptyMessage, EmptyTrainingSet,
                     MissingArtifact)
from .metrics import bleu
from .preprocess import PAD_ID, Vocabulary

log = logging.getLogger(__name__)

DIFF_CAP = 128
MSG_CAP = 20
RETRIEVED = "retrieved"
GENERATED = "generated"


@dataclass
class RankerConfig:
    embed_dim: int = 128
    kernels: int = 16
    kernel_size: int = 3
    pool: int = 2
    diff_cap: int = DIFF_CAP
    msg_cap: int = MSG_CAP
    lr: float = 1e-3
    batch_size: int = 16
    epochs: int = 200
    patience: int = 20
    valid_fraction: float = 0.1
    min_freq: int = 2
    seed: int = 0

    def as_dict(self):
        return asdict(self)


class Ranker(Protocol):
    """Anything that maps (diff tokens, message tokens) to a relevance score."""

    def score(self, diff_tokens, msg_tokens) -> float: ...


@dataclass
class CandidatePair:
    commit_id: str
    msg_t: list
    msg_g: list
    score_t: float
    score_g: float
    chosen: str

    @property
    def message(self):
        return self.msg_g if self.chosen == GENERATED else self.msg_t

    def to_json(self):
        return {"commit_id": self.commit_id, "score_t": self.score_t, "score_g": self.score_g,
                "chosen": self.chosen, "msg_t": self.msg_t, "msg_g": self.msg_g}


def select(diff_tokens, msg_t, msg_g, ranker, commit_id=""):
    """Pick the generated message only when it scores strictly higher."""
    s_t = float(ranker.score(diff_tokens, msg_t))
    s_g = float(ranker.score(diff_tokens, msg_g))
    return CandidatePair(commit_id, list(msg_t), list(msg_g), s_t, s_g,
                         GENERATED if s_g > s_t else RETRIEVED)


class OracleRanker:
    """Scores a candidate by its true BLEU-4 against a known reference."""

    def __init__(self, references):
        self.references = references  # diff key -> reference tokens

    def score(self, diff_tokens, msg_tokens):
        ref = self.references[tuple(diff_tokens)]
        return bleu(msg_tokens, ref, 4) / 100.0 if msg_tokens else 0.0


# ---------------------------------------------------------------- network

def _pad(ids, cap):
    ids = list(ids)[:cap]
    return ids + [PAD_ID] * (cap - len(ids))


def matching_matrix(e_d, e_y, diff_ids, msg_ids):
    """D = E(d) E(y)^T for index lists (Tensors in, Tensor out)."""
    a = ad.embedding_lookup(e_d, np.asarray(diff_ids))
    b = ad.embedding_lookup(e_y, np.asarray(msg_ids))
    return ad.matmul(a, ad.transpose(b, (0, 2, 1)) if b.ndim == 3 else ad.transpose(b))


class ConvRanker:
    """Conv(16 kernels 3x3, same) -> ReLU -> max-pool 2x2/2 -> linear scalar."""

    def __init__(self, diff_vocab, msg_vocab, config=None, init=True):
        self.config = config or RankerConfig()
        self.diff_vocab = diff_vocab
        self.msg_vocab = msg_vocab
        self.params = ParamStore()
        if init:
            self._init_params()

    @property
    def pooled_shape(self):
        c = self.config
        return c.kernels, c.diff_cap // c.pool, c.msg_cap // c.pool

    def _init_params(self):
        c = self.config
        rng = rng_stream(c.seed, "ranker.init")
        k = c.kernel_size
        self.params.add("E_d", xavier_uniform(rng, (len(self.diff_vocab), c.embed_dim)))
        self.params.add("E_y", xavier_uniform(rng, (len(self.msg_vocab), c.embed_dim)))
        self.params.add("conv.W", xavier_uniform(rng, (c.kernels, 1, k, k)))
        self.params.add("conv.b", np.zeros(c.kernels))
        flat = int(np.prod(self.pooled_shape))
        self.params.add("head.W", xavier_uniform(rng, (flat, 1)))
        self.params.add("head.b", np.zeros(1))

    def encode(self, diff_tokens, msg_tokens):
        """Capped, padded index rows for one (diff, message) pair."""
        if not msg_tokens:
            raise EmptyMessage("candidate message is empty")
        c = self.config
        return (_pad(self.diff_vocab.encode(diff_tokens), c.diff_cap),
                _pad(self.msg_vocab.encode(msg_tokens), c.msg_cap))

    def forward(self, diff_ids, msg_ids):
        """Scores for a batch of index rows: (B, diff_cap), (B, msg_cap) -> (B,)."""
        p = self.params
        D = matching_matrix(p["E_d"], p["E_y"], diff_ids, msg_ids)      # (B, Ld, Ly)
        b = D.shape[0]
        x = D.reshape(b, 1, D.shape[1], D.shape[2])
        h = ad.relu(ad.conv_2d(x, p["conv.W"], p["conv.b"], padding="same"))
        pooled = ad.max_pool_2d(h, (self.config.pool,) * 2, (self.config.pool,) * 2)
        flat = pooled.reshape(b, -1)
        return (ad.matmul(flat, p["head.W"]) + p["head.b"]).reshape(b)

    def score(self, diff_tokens, msg_tokens):
        d, m = self.encode(diff_tokens, msg_tokens)
        with no_grad():
            return float(self.forward([d], [m]).data[0])

    # ------------------------------------------------------------ persistence

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.params.save(directory / "ranker.ckpt")
        meta = {"config": self.config.as_dict(), "diff_vocab": self.diff_vocab.to_json(),
                "msg_vocab": self.msg_vocab.to_json(), "checkpoint_sha256": self.params.digest()}
        (directory / "ranker.manifest.json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        ckpt, mpath = directory / "ranker.ckpt", directory / "ranker.manifest.json"
        for path in (ckpt, mpath):
            if not path.exists():
                raise MissingArtifact("ranker", str(path))
        meta = json.loads(mpath.read_text())
        model = cls(Vocabulary.from_json(meta["diff_vocab"]), Vocabulary.from_json(meta["msg_vocab"]),
                    RankerConfig(**meta["config"]), init=False)
        model.params = ParamStore.load(ckpt)
        if model.params.digest() != meta["checkpoint_sha256"]:
            raise ConfigMismatch("ranker checkpoint does not match its manifest hash")
        return model


# ---------------------------------------------------------------- data + training

@dataclass
class RankingRow:
    commit_id: str
    diff: list
    candidate: list
    target: float
    source: str = ""


@dataclass
class RankerReport:
    train_loss: list = field(default_factory=list)
    valid_loss: list = field(default_factory=list)
    best_epoch: int = 0
    epochs_run: int = 0
    skipped: int = 0

    def to_json(self):
        return asdict(self)


def relevance(candidate, reference):
    """Training target: BLEU-4 / 100."""
    return bleu(candidate, reference, 4) / 100.0 if candidate else 0.0


def build_ranking_dataset(commits, generate_fn, index, counts=None):
    """Two rows per training commit: retrieved (self excluded) and generated candidates.

    ``commits`` yields (commit_id, diff_tokens, reference_tokens, contexts);
    ``generate_fn(contexts)`` returns generated tokens.
    """
    counts = {} if counts is None else counts
    counts.setdefault("skipped", 0)
    rows = []
    for commit_id, diff_tokens, reference, contexts in commits:
        try:
            retrieved = index.retrieve_excluding(diff_tokens, commit_id).message
            generated = generate_fn(contexts)
        except CommitGenError as exc:
            log.warning("ranking row for %s skipped: %s", commit_id, exc)
            counts["skipped"] += 1
            continue
        for source, cand in ((RETRIEVED, retrieved), (GENERATED, generated)):
            if not cand:
                counts["skipped"] += 1
                continue
            rows.append(RankingRow(commit_id, list(diff_tokens), list(cand),
                                   relevance(cand, reference), source))
    return rows


def ranker_vocabs(rows, min_freq=2):
    diff_counts = Counter()
    msg_counts = Counter()
    seen = set()
    for r in rows:
        if r.commit_id not in seen:
            seen.add(r.commit_id)
            diff_counts.update(r.diff)
        msg_counts.update(r.candidate)
    return (Vocabulary.from_counts("ranker_diff", diff_counts, min_freq),
            Vocabulary.from_counts("ranker_msg", msg_counts, min_freq))


def _split_rows(rows, fraction, seed):
    """Hold out whole commits for validation."""
    ids = sorted({r.commit_id for r in rows})
    rng = np.random.default_rng(seed)
    rng.shuffle(ids)
    n_valid = int(round(len(ids) * fraction)) if len(ids) > 1 else 0
    valid_ids = set(ids[:n_valid])
    return ([r for r in rows if r.commit_id not in valid_ids],
            [r for r in rows if r.commit_id in valid_ids])


def _arrays(model, rows):
    pairs = [model.encode(r.diff, r.candidate) for r in rows]
    return (np.array([p[0] for p in pairs], np.int64), np.array([p[1] for p in pairs], np.int64),
            np.array([r.target for r in rows], ad.default_dtype()))


def _mean_loss(model, arrays, batch_size):
    d, m, y = arrays
    if len(y) == 0:
        return float("nan")
    total = 0.0
    with no_grad():
        for s in range(0, len(y), batch_size):
            pred = model.forward(d[s:s + batch_size], m[s:s + batch_size])
            total += float(ad.mse(pred, Tensor(y[s:s + batch_size])).data) * len(y[s:s + batch_size])
    return total / len(y)


def train_ranker(rows, config=None, diff_vocab=None, msg_vocab=None, on_epoch=None):
    """Fit a ConvRanker with MSE + Adam; best-validation parameters are kept."""
    if not rows:
        raise EmptyTrainingSet("ranking dataset is empty")
    config = config or RankerConfig()
    train_rows, valid_rows = _split_rows(rows, config.valid_fraction, config.seed)
    if diff_vocab is None or msg_vocab is None:
        diff_vocab, msg_vocab = ranker_vocabs(train_rows, config.min_freq)
    model = ConvRanker(diff_vocab, msg_vocab, config)
    train_arr = _arrays(model, train_rows)
    valid_arr = _arrays(model, valid_rows) if valid_rows else train_arr
    batch_rng = rng_stream(config.seed, "ranker.batches")
    stopper = EarlyStopping(config.patience)
    report = RankerReport()
    best = model.params.snapshot()
    d, m, y = train_arr
    for epoch in range(1, config.epochs + 1):
        order = batch_rng.permutation(len(y))
        losses = []
        for s in range(0, len(y), config.batch_size):
            idx = order[s:s + config.batch_size]
            loss = ad.mse(model.forward(d[idx], m[idx]), Tensor(y[idx]))
            loss.backward()
            model.params.adam_step(lr=config.lr)
            losses.append(float(loss.data))
        report.train_loss.append(float(np.mean(losses)))
        v = _mean_loss(model, valid_arr, config.batch_size)
        report.valid_loss.append(v)
        report.epochs_run = epoch
        improved, stop = stopper.update(epoch, v)
        if improved:
            best = model.params.snapshot()
        if on_epoch is not None:
            on_epoch(epoch, report)
        if stop:
            break
    model.params.restore(best)
    report.best_epoch = stopper.best_epoch
    return model, report
