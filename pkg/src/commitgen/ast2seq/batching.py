"""Index-encoding of path contexts and messages into padded arrays."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import EmptyContext
from ..preprocess import EOS_ID, PAD_ID, SOS_ID, UNK_ID, split_subtokens

NODE_OFFSET = 4  # node-type vocabulary index = NodeType value + reserved slots


@lru_cache(maxsize=65536)
def _subtokens(leaf):
    return tuple(split_subtokens(leaf))


@dataclass
class PathBatch:
    """All paths of a batch flattened, plus the scatter into (B, P) slots."""
    node_ids: np.ndarray      # (N, L) left-aligned node indices
    node_ids_rev: np.ndarray  # (N, L) each sequence reversed, still left-aligned
    node_mask: np.ndarray     # (N, L) 1.0 where a node is present
    start_sub: np.ndarray     # (N, K) subtoken rows, polarity offset applied
    end_sub: np.ndarray
    start_mask: np.ndarray    # (N, K)
    end_mask: np.ndarray
    gather: np.ndarray        # (B, P) index into the N path rows; N means padding
    mask: np.ndarray          # (B, P) bool
    y_in: np.ndarray | None = None   # (B, T) SOS + tokens
    y_out: np.ndarray | None = None  # (B, T) tokens + EOS, PAD-filled

    @property
    def batch_size(self):
        return self.gather.shape[0]


def _leaf_rows(leaf, vocab, offset):
    ids = [vocab.index(s) for s in _subtokens(leaf)] or [UNK_ID]
    return [i + offset for i in ids]


def encode_message(tokens, vocab):
    return vocab.encode(tokens)


def make_batch(contexts, subtoken_vocab, messages=None, target_vocab=None,
               polarity_embeddings="separate"):
    """Pad a list of PathContextSets (and optional token messages) into arrays."""
    deleted_offset = len(subtoken_vocab) if polarity_embeddings == "separate" else 0
    rows = []  # (nodes, start ids, end ids)
    slots = []
    for ctx in contexts:
        mine = []
        for polarity, offset in (("added", 0), ("deleted", deleted_offset)):
            for path in getattr(ctx, polarity):
                mine.append(len(rows))
                rows.append(([int(n) + NODE_OFFSET for n in path.node_sequence],
                             _leaf_rows(path.start_leaf, subtoken_vocab, offset),
                             _leaf_rows(path.end_leaf, subtoken_vocab, offset)))
        if not mine:
            raise EmptyContext("commit has no paths in either polarity")
        slots.append(mine)

    n = len(rows)
    max_l = max(len(r[0]) for r in rows)
    max_k = max(max(len(r[1]), len(r[2])) for r in rows)
    node_ids = np.zeros((n, max_l), np.int64)
    node_rev = np.zeros((n, max_l), np.int64)
    node_mask = np.zeros((n, max_l), np.float32)
    start_sub = np.zeros((n, max_k), np.int64)
    end_sub = np.zeros((n, max_k), np.int64)
    start_mask = np.zeros((n, max_k), np.float32)
    end_mask = np.zeros((n, max_k), np.float32)
    for i, (nodes, a, b) in enumerate(rows):
        node_ids[i, :len(nodes)] = nodes
        node_rev[i, :len(nodes)] = nodes[::-1]
        node_mask[i, :len(nodes)] = 1.0
        start_sub[i, :len(a)] = a
        start_mask[i, :len(a)] = 1.0
        end_sub[i, :len(b)] = b
        end_mask[i, :len(b)] = 1.0

    max_p = max(len(s) for s in slots)
    gather = np.full((len(slots), max_p), n, np.int64)
    mask = np.zeros((len(slots), max_p), bool)
    for b, s in enumerate(slots):
        gather[b, :len(s)] = s
        mask[b, :len(s)] = True

    batch = PathBatch(node_ids, node_rev, node_mask, start_sub, end_sub, start_mask, end_mask,
                      gather, mask)
    if messages is not None:
        encoded = [target_vocab.encode(m) for m in messages]
        t = max(len(e) for e in encoded) + 1
        y_in = np.full((len(encoded), t), PAD_ID, np.int64)
        y_out = np.full((len(encoded), t), PAD_ID, np.int64)
        for b, e in enumerate(encoded):
            y_in[b, 0] = SOS_ID
            y_in[b, 1:len(e) + 1] = e
            y_out[b, :len(e)] = e
            y_out[b, len(e)] = EOS_ID
        batch.y_in, batch.y_out = y_in, y_out
    return batch
