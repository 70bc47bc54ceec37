"""Tiny AST2seq fixtures shared by the model, decoding and acceptance tests."""

from __future__ import annotations

import numpy as np

from commitgen.ast2seq import Ast2Seq, ModelConfig
from commitgen.astpaths import AstPath, PathContextSet
from commitgen.java.nodes import NodeType
from commitgen.preprocess import Vocabulary

SUBTOKENS = ("on", "or", "after", "count", "size", "null", "return")
TARGETS = ("fix", "add", "check", "null", "count")

N = NodeType


def vocabs():
    return {"subtoken": Vocabulary("subtoken", SUBTOKENS),
            "target": Vocabulary("target", TARGETS)}


def path(start, nodes, end):
    return AstPath(start, tuple(nodes), end)


PATH_A = path("onOrAfter", (N.NameExpr, N.BinaryExpr, N.NameExpr), "count")
PATH_B = path("size", (N.NameExpr, N.MethodCallExpr), "null")
PATH_C = path("return", (N.ReturnStmt,), "count")


def contexts():
    """Two commits with different path counts so batches need padding."""
    return [PathContextSet(added=[PATH_A], deleted=[PATH_B]),
            PathContextSet(added=[PATH_C, PATH_B, PATH_A], deleted=[])]


def tiny_config(**kw):
    base = dict(embed_dim=4, hidden_dim=8, dropout=0.4, batch_size=2, epochs=50, patience=20,
                beam_width=5, max_len=6, seed=0)
    base.update(kw)
    return ModelConfig(**base)


def tiny_model(seed=0, scale=1.0, **kw):
    """Randomly initialised toy model; ``scale`` widens the weights for peaky outputs."""
    v = vocabs()
    model = Ast2Seq(len(v["subtoken"]), len(v["target"]), tiny_config(seed=seed, **kw))
    if scale != 1.0:
        for t in model.params.params.values():
            t.data *= scale
    return model, v


def random_model(seed):
    """Toy model whose parameters are drawn i.i.d. normal, for decoding properties."""
    model, v = tiny_model(seed)
    rng = np.random.default_rng(seed)
    for t in model.params.params.values():
        t.data[...] = rng.normal(scale=1.5, size=t.shape)
    return model, v
