"""Greedy and beam-search decoding over a frozen model."""

from __future__ import annotations

import numpy as np

from ..autodiff import log_softmax_np, no_grad
from ..autodiff.tensor import Tensor
from ..preprocess import EOS_ID, PAD_ID, SOS_ID
from .model import Encoded

# tokens never emitted by the decoder
_BANNED = (PAD_ID, SOS_ID)


def _log_probs(logits):
    lp = log_softmax_np(logits.astype(np.float64), axis=-1)
    lp[:, list(_BANNED)] = -np.inf
    return lp


def _select(enc, rows):
    """Encoded restricted/replicated to the given batch rows."""
    rows = np.asarray(rows)
    h0 = Tensor(enc.h0.data[rows])
    return Encoded(Tensor(enc.Z.data[rows]), enc.mask[rows], h0)


def greedy_decode(model, enc, max_len=20):
    """Argmax decoding of the first batch row; ties go to the lowest token index."""
    with no_grad():
        enc = _select(enc, [0])
        state = model.initial_state(enc)
        mask_bias = enc.mask_bias
        y = SOS_ID
        out = []
        for _ in range(max_len):
            logits, state, _ = model.decode_step([y], state, enc, mask_bias)
            y = int(np.argmax(_log_probs(logits)[0]))
            if y == EOS_ID:
                break
            out.append(y)
        return out


def beam_search(model, enc, beam_width=5, max_len=20):
    """Best complete hypothesis by total log-probability (no length normalization).

    A hypothesis completes at EOS or after ``max_len`` tokens. Ties go to the
    earlier completion, then to the lexicographically smaller index sequence.
    """
    with no_grad():
        base = _select(enc, [0])
        live = [(0.0, ())]                     # (score, tokens)
        state = model.initial_state(base)
        states_h, states_c = state[0].data, state[1].data
        completed = []                          # (score, step, tokens)
        for step in range(1, max_len + 1):
            k = len(live)
            rep = _select(base, [0] * k)
            prev = [toks[-1] if toks else SOS_ID for _, toks in live]
            logits, (h, c), _ = model.decode_step(prev, (Tensor(states_h), Tensor(states_c)), rep,
                                                  rep.mask_bias)
            lp = _log_probs(logits)
            cands = []
            for b, (score, toks) in enumerate(live):
                for v in np.flatnonzero(np.isfinite(lp[b])):
                    cands.append((score + float(lp[b, v]), toks + (int(v),), b))
            cands.sort(key=lambda s: (-s[0], s[1]))
            cands = cands[:beam_width]
            next_live, rows = [], []
            for score, toks, b in cands:
                if toks[-1] == EOS_ID:
                    completed.append((score, step, toks[:-1]))
                elif len(toks) == max_len:
                    completed.append((score, step, toks))
                else:
                    next_live.append((score, toks))
                    rows.append(b)
            if not next_live:
                break
            live = next_live
            states_h, states_c = h.data[rows], c.data[rows]
            best_done = max((s for s, _, _ in completed), default=-np.inf)
            # scores only decrease, so no live hypothesis can beat a finished one
            if best_done >= live[0][0]:
                break
        completed.sort(key=lambda s: (-s[0], s[1], s[2]))
        return list(completed[0][2])
