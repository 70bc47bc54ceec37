"""Path encoder (bi-LSTM + leaf subtokens + fusion) and Luong-attention decoder."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import ParamStore, Tensor, rng_stream, xavier_uniform
from ..java.nodes import NodeType
from ..preprocess import PAD_ID
from .batching import NODE_OFFSET, PathBatch


@dataclass
class ModelConfig:
    embed_dim: int = 128
    hidden_dim: int = 256          # decoder width; the path bi-LSTM uses half per direction
    dropout: float = 0.4
    polarity_embeddings: str = "separate"
    lr: float = 1e-4
    batch_size: int = 16
    epochs: int = 500
    patience: int = 20
    beam_width: int = 5
    max_len: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.hidden_dim % 2:
            raise ValueError("hidden_dim must be even (two path-LSTM directions)")
        if self.polarity_embeddings not in ("separate", "shared"):
            raise ValueError("polarity_embeddings must be 'separate' or 'shared'")

    def as_dict(self):
        return asdict(self)


def lstm_cell(x, h, c, w, b):
    """Fused-gate LSTM step; gate order (input, forget, cell, output)."""
    n = h.shape[-1]
    gates = ad.matmul(ad.concat([x, h], axis=-1), w) + b
    i = ad.sigmoid(gates[:, 0:n])
    f = ad.sigmoid(gates[:, n:2 * n])
    g = ad.tanh(gates[:, 2 * n:3 * n])
    o = ad.sigmoid(gates[:, 3 * n:4 * n])
    c_new = f * c + i * g
    h_new = o * ad.tanh(c_new)
    return h_new, c_new


def _lstm_params(store, prefix, rng, n_in, n_hidden):
    store.add(f"{prefix}.W", xavier_uniform(rng, (n_in + n_hidden, 4 * n_hidden)))
    bias = np.zeros(4 * n_hidden)
    bias[n_hidden:2 * n_hidden] = 1.0  # forget-gate bias
    store.add(f"{prefix}.b", bias)


@dataclass
class Encoded:
    Z: Tensor          # (B, P, H)
    mask: np.ndarray   # (B, P) bool
    h0: Tensor         # (B, H)

    @property
    def mask_bias(self):
        return np.where(self.mask, 0.0, -np.inf).astype(self.Z.data.dtype)


class Ast2Seq:
    """Parameters and differentiable forward pass of the generation model."""

    def __init__(self, subtoken_size, target_size, config=None, init=True):
        self.config = config or ModelConfig()
        self.subtoken_size = int(subtoken_size)
        self.target_size = int(target_size)
        self.params = ParamStore()
        if init:
            self._init_params()

    # ------------------------------------------------------------ parameters

    def _init_params(self):
        cfg = self.config
        e, h = cfg.embed_dim, cfg.hidden_dim
        hp = h // 2
        rng = rng_stream(cfg.seed, "ast2seq.init")
        sub_rows = self.subtoken_size * (2 if cfg.polarity_embeddings == "separate" else 1)
        s = self.params
        s.add("enc.node_emb", xavier_uniform(rng, (len(NodeType) + NODE_OFFSET, e)))
        s.add("enc.sub_emb", xavier_uniform(rng, (sub_rows, e)))
        _lstm_params(s, "enc.fwd", rng, e, hp)
        _lstm_params(s, "enc.bwd", rng, e, hp)
        s.add("enc.fuse.W", xavier_uniform(rng, (e + h + e, h)))
        s.add("enc.fuse.b", np.zeros(h))
        s.add("dec.tgt_emb", xavier_uniform(rng, (self.target_size, e)))
        _lstm_params(s, "dec.lstm", rng, e, h)
        s.add("dec.W_a", xavier_uniform(rng, (h, h)))
        s.add("dec.W_c", xavier_uniform(rng, (2 * h, h)))
        s.add("dec.W_s", xavier_uniform(rng, (h, self.target_size)))

    def p(self, name):
        return self.params[name]

    # ------------------------------------------------------------ encoder

    def _run_direction(self, prefix, ids, mask):
        """Final hidden state of one LSTM direction over left-aligned sequences."""
        n, steps = ids.shape
        hp = self.config.hidden_dim // 2
        dtype = ad.default_dtype()
        h = Tensor(np.zeros((n, hp), dtype))
        c = Tensor(np.zeros((n, hp), dtype))
        table = self.p("enc.node_emb")
        w, b = self.p(f"{prefix}.W"), self.p(f"{prefix}.b")
        for t in range(steps):
            m = mask[:, t:t + 1]
            x = ad.embedding_lookup(table, ids[:, t])
            h_new, c_new = lstm_cell(x, h, c, w, b)
            if m.all():
                h, c = h_new, c_new
            else:
                keep = 1.0 - m
                h = h_new * m + h * keep
                c = c_new * m + c * keep
        return h

    def leaf_features(self, sub_ids, sub_mask):
        """Sum of subtoken embeddings per leaf: (N, K) -> (N, E)."""
        emb = ad.embedding_lookup(self.p("enc.sub_emb"), sub_ids)
        return ad.sum_(emb * sub_mask[:, :, None], axis=1)

    def path_vectors(self, batch: PathBatch):
        """Fused path vectors z for every flattened path: (N, H)."""
        fwd = self._run_direction("enc.fwd", batch.node_ids, batch.node_mask)
        bwd = self._run_direction("enc.bwd", batch.node_ids_rev, batch.node_mask)
        path_feat = ad.concat([bwd, fwd], axis=-1)
        start = self.leaf_features(batch.start_sub, batch.start_mask)
        end = self.leaf_features(batch.end_sub, batch.end_mask)
        fused = ad.concat([start, path_feat, end], axis=-1)
        return ad.tanh(ad.matmul(fused, self.p("enc.fuse.W")) + self.p("enc.fuse.b"))

    def encode(self, batch: PathBatch):
        z = self.path_vectors(batch)
        h = self.config.hidden_dim
        padded = ad.concat([z, np.zeros((1, h), ad.default_dtype())], axis=0)
        Z = padded[batch.gather]  # (B, P, H)
        m = batch.mask.astype(ad.default_dtype())
        counts = m.sum(axis=1, keepdims=True)
        h0 = ad.sum_(Z * m[:, :, None], axis=1) * (1.0 / counts)
        return Encoded(Z, batch.mask, h0)

    # ------------------------------------------------------------ decoder

    def attention(self, h_t, enc: Encoded, mask_bias=None):
        """alpha (B, P) and context c_t (B, H) for decoder state h_t (B, H)."""
        if mask_bias is None:
            mask_bias = enc.mask_bias
        q = ad.matmul(h_t, self.p("dec.W_a"))                 # (B, H)
        b, h = q.shape
        scores = ad.matmul(q.reshape(b, 1, h), ad.transpose(enc.Z, (0, 2, 1))).reshape(b, -1)
        alpha = ad.softmax(scores + mask_bias, axis=-1)
        ctx = ad.matmul(alpha.reshape(b, 1, -1), enc.Z).reshape(b, h)
        return alpha, ctx

    def step(self, y_prev, h, c, enc, mask_bias=None, training=False, rng=None):
        """One decoder step; returns (pre-logit output, h, c, alpha)."""
        x = ad.embedding_lookup(self.p("dec.tgt_emb"), y_prev)
        h, c = lstm_cell(x, h, c, self.p("dec.lstm.W"), self.p("dec.lstm.b"))
        alpha, ctx = self.attention(h, enc, mask_bias)
        out = ad.tanh(ad.matmul(ad.concat([ctx, h], axis=-1), self.p("dec.W_c")))
        out = ad.dropout(out, self.config.dropout, training, rng)
        return out, h, c, alpha

    def initial_state(self, enc: Encoded):
        c0 = Tensor(np.zeros(enc.h0.shape, ad.default_dtype()))
        return enc.h0, c0

    def decode_step(self, y_prev, state, enc, mask_bias=None):
        """Inference step: (logits (B, r) as numpy, new state, alpha)."""
        h, c = state
        out, h, c, alpha = self.step(np.asarray(y_prev), h, c, enc, mask_bias)
        logits = ad.matmul(out, self.p("dec.W_s"))
        return logits.data, (h, c), alpha.data

    def logits(self, batch: PathBatch, training=False, rng=None):
        """Teacher-forced logits for every target position: (B*T, r)."""
        enc = self.encode(batch)
        mask_bias = enc.mask_bias
        h, c = self.initial_state(enc)
        outs = []
        for t in range(batch.y_in.shape[1]):
            out, h, c, _ = self.step(batch.y_in[:, t], h, c, enc, mask_bias, training, rng)
            outs.append(out)
        stacked = ad.concat(outs, axis=0)                      # (T*B, H), time-major
        return ad.matmul(stacked, self.p("dec.W_s"))

    def loss(self, batch: PathBatch, training=False, rng=None):
        """Mean token cross-entropy over non-PAD targets."""
        logits = self.logits(batch, training, rng)
        targets = batch.y_out.T.reshape(-1)                   # time-major to match logits
        return ad.cross_entropy_with_logits(logits, targets, ignore_index=PAD_ID)
