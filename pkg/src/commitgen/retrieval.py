"""TF-IDF diff-to-diff nearest-neighbour retrieval."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import ConfigMismatch, EmptyIndex

INDEX_FORMAT = "commitgen-tfidf-1"


@dataclass
class Retrieved:
    message: list
    commit_id: str
    cosine: float
    doc: int


class TfIdfIndex:
    """Sparse tf-idf rows over training diffs; tokens are case-sensitive."""

    def __init__(self, tokens, df, n_docs, matrix, norms, messages, commit_ids):
        self.tokens = list(tokens)
        self.column = {t: i for i, t in enumerate(self.tokens)}
        self.df = np.asarray(df, dtype=np.int64)
        self.n_docs = int(n_docs)
        self.idf = np.log(self.n_docs / self.df) if len(self.df) else np.zeros(0)
        self.matrix = matrix.tocsr()
        self.norms = np.asarray(norms, dtype=np.float64)
        self.messages = [list(m) for m in messages]
        self.commit_ids = list(commit_ids)

    @classmethod
    def build(cls, docs, messages, commit_ids):
        """``docs`` are token lists (added then deleted tokens of each diff)."""
        docs = [list(d) for d in docs]
        if not docs:
            raise EmptyIndex("cannot index an empty training set")
        vocab = {}
        for d in docs:
            for t in d:
                vocab.setdefault(t, len(vocab))
        tokens = list(vocab)
        df = np.zeros(len(tokens), dtype=np.int64)
        rows, cols, tfs = [], [], []
        for r, d in enumerate(docs):
            counts = Counter(d)
            total = sum(counts.values())
            for t, c in counts.items():
                rows.append(r)
                cols.append(vocab[t])
                tfs.append(c / total)
                df[vocab[t]] += 1
        idf = np.log(len(docs) / df) if len(df) else np.zeros(0)
        cols_arr = np.asarray(cols, dtype=np.int64)
        values = np.asarray(tfs, dtype=np.float64) * idf[cols_arr] if len(cols) else np.zeros(0)
        matrix = sparse.csr_matrix((values, (rows, cols_arr)), shape=(len(docs), len(tokens)))
        matrix.sort_indices()
        norms = np.sqrt(np.asarray(matrix.multiply(matrix).sum(axis=1)).ravel())
        return cls(tokens, df, len(docs), matrix, norms, messages, commit_ids)

    def __len__(self):
        return self.n_docs

    def vectorize(self, query_tokens):
        """tf-idf vector of a query; tokens unseen at build time are dropped."""
        counts = Counter(t for t in query_tokens if t in self.column)
        total = sum(Counter(query_tokens).values())
        vec = np.zeros(len(self.tokens))
        if total == 0:
            return vec
        for t, c in counts.items():
            col = self.column[t]
            vec[col] = (c / total) * self.idf[col]
        return vec

    def cosines(self, query_tokens):
        q = self.vectorize(query_tokens)
        qn = math.sqrt(float(q @ q))
        if qn == 0.0:
            return np.zeros(self.n_docs)
        dots = self.matrix @ q
        out = np.zeros(self.n_docs)
        nz = self.norms > 0
        out[nz] = dots[nz] / (self.norms[nz] * qn)
        return np.clip(out, 0.0, 1.0)

    def _best(self, sims, excluded=None):
        order = np.argsort(-sims, kind="stable")  # stable keeps lowest index among ties
        for doc in order:
            if excluded is not None and self.commit_ids[doc] == excluded:
                continue
            return Retrieved(self.messages[doc], self.commit_ids[doc], float(sims[doc]), int(doc))
        raise EmptyIndex("no document left after exclusion")

    def retrieve(self, query_tokens):
        return self._best(self.cosines(query_tokens))

    def retrieve_excluding(self, query_tokens, excluded_commit_id):
        return self._best(self.cosines(query_tokens), excluded_commit_id)

    def rank(self, query_tokens):
        """All document indices, best first."""
        return list(np.argsort(-self.cosines(query_tokens), kind="stable"))

    # ------------------------------------------------------------ persistence

    def to_json(self):
        m = self.matrix
        return {"format": INDEX_FORMAT,
                "header": {"n_docs": self.n_docs, "vocab_size": len(self.tokens)},
                "tokens": self.tokens,
                "df": self.df.tolist(),
                "csr": {"indptr": m.indptr.tolist(), "indices": m.indices.tolist(),
                        "data": m.data.tolist()},
                "norms": self.norms.tolist(),
                "messages": self.messages,
                "commit_ids": self.commit_ids}

    @classmethod
    def from_json(cls, obj):
        if obj.get("format") != INDEX_FORMAT:
            raise ConfigMismatch(f"unknown index format {obj.get('format')!r}")
        h = obj["header"]
        csr = obj["csr"]
        matrix = sparse.csr_matrix(
            (np.asarray(csr["data"], dtype=np.float64), np.asarray(csr["indices"], dtype=np.int64),
             np.asarray(csr["indptr"], dtype=np.int64)), shape=(h["n_docs"], h["vocab_size"]))
        return cls(obj["tokens"], obj["df"], h["n_docs"], matrix, obj["norms"], obj["messages"],
                   obj["commit_ids"])

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def build_index(docs, messages, commit_ids):
    return TfIdfIndex.build(docs, messages, commit_ids)
