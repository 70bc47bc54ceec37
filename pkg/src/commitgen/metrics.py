"""Sentence-level BLEU-N, ROUGE-L and exact-match Meteor, scaled to [0, 100]."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass

from .errors import EmptyReference, EmptySequence

SMOOTH_EPS = 1e-9
METEOR_EXHAUSTIVE_MAX = 20
METRIC_NAMES = ("bleu1", "bleu2", "bleu3", "bleu4", "rouge_l", "meteor")


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def modified_precision(candidate, reference, n):
    cand = _ngrams(candidate, n)
    total = sum(cand.values())
    if total == 0:
        return 0.0
    ref = _ngrams(reference, n)
    clipped = sum(min(c, ref[g]) for g, c in cand.items())
    return clipped / total


def brevity_penalty(c, r):
    if c > r:
        return 1.0
    if c == 0:
        return 0.0
    return math.exp(1.0 - r / c)


def bleu(candidate, reference, n=4):
    """BLEU-N with uniform weights; zero precisions are smoothed to ``SMOOTH_EPS``."""
    if not reference:
        raise EmptyReference("reference must contain at least one token")
    if n not in (1, 2, 3, 4):
        raise ValueError("n must be in 1..4")
    if not candidate:
        return 0.0
    if list(candidate) == list(reference):
        return 100.0  # exact identity, avoids 1-ulp drift from exp(log(1))
    log_sum = 0.0
    for k in range(1, n + 1):
        p = modified_precision(candidate, reference, k)
        log_sum += math.log(p if p > 0 else SMOOTH_EPS)
    score = brevity_penalty(len(candidate), len(reference)) * math.exp(log_sum / n)
    return 100.0 * min(score, 1.0)


def lcs_length(a, b):
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, reference):
    if not candidate or not reference:
        raise EmptySequence("ROUGE-L needs two non-empty sequences")
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return 100.0 * 2 * p * r / (p + r)


def count_chunks(alignment):
    """Runs of matches contiguous and in order on both sides; ``alignment`` is sorted by candidate index."""
    chunks = 0
    prev = None
    for i, j in alignment:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def _exhaustive_alignment(candidate, reference):
    """Maximum-match alignment with the fewest chunks.

    Every maximum-match alignment matches ``min(count_cand, count_ref)``
    occurrences of each word, so only those are enumerated. Chunks are placed
    whole (diagonal runs) and the search is memoized on (position, used
    reference slots, remaining skips).
    """
    n, m = len(candidate), len(reference)
    by_word = {}
    for j, w in enumerate(reference):
        by_word.setdefault(w, []).append(j)
    words = sorted(set(candidate))
    slot_of = {w: k for k, w in enumerate(words)}
    start_skips = tuple(max(0, candidate.count(w) - len(by_word.get(w, ()))) for w in words)
    # only slots of words still ahead in the candidate can influence the rest
    live = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        live[i] = live[i + 1]
        for j in by_word.get(candidate[i], ()):
            live[i] |= 1 << j
    memo = {}

    def solve(i, used, skips):
        """(chunks, alignment) for candidate[i:], or None when infeasible."""
        if i == n:
            return (0, ())
        key = (i, used & live[i], skips)
        if key in memo:
            return memo[key]
        w = candidate[i]
        best = None
        for j in by_word.get(w, ()):
            if used >> j & 1:
                continue
            mask = used
            run = []
            k = 0
            while (i + k < n and j + k < m and not (used >> (j + k) & 1)
                   and candidate[i + k] == reference[j + k]):
                mask |= 1 << (j + k)
                run.append((i + k, j + k))
                k += 1
                sub = solve(i + k, mask, skips)
                if sub is not None and (best is None or sub[0] + 1 < best[0]):
                    best = (sub[0] + 1, tuple(run) + sub[1])
        s = slot_of[w]
        if skips[s] > 0:
            sub = solve(i + 1, used, skips[:s] + (skips[s] - 1,) + skips[s + 1:])
            if sub is not None and (best is None or sub[0] < best[0]):
                best = sub
        memo[key] = best
        return best

    return list(solve(0, 0, start_skips)[1])


def _greedy_alignment(candidate, reference):
    used = set()
    alignment = []
    for i, w in enumerate(candidate):
        # prefer the slot continuing the previous match, then the leftmost free one
        options = [j for j, r in enumerate(reference) if r == w and j not in used]
        if not options:
            continue
        if alignment and alignment[-1][0] == i - 1 and alignment[-1][1] + 1 in options:
            j = alignment[-1][1] + 1
        else:
            j = options[0]
        used.add(j)
        alignment.append((i, j))
    return alignment


def align(candidate, reference):
    if len(candidate) <= METEOR_EXHAUSTIVE_MAX and len(reference) <= METEOR_EXHAUSTIVE_MAX:
        return _exhaustive_alignment(candidate, reference)
    return _greedy_alignment(candidate, reference)


def meteor(candidate, reference):
    """Exact-match Meteor: Fmean * (1 - 0.5 * (chunks / matches) ** 3)."""
    if not candidate or not reference:
        raise EmptySequence("Meteor needs two non-empty sequences")
    alignment = align(list(candidate), list(reference))
    m = len(alignment)
    if m == 0:
        return 0.0
    p = m / len(candidate)
    r = m / len(reference)
    fmean = 10 * p * r / (r + 9 * p)
    penalty = 0.5 * (count_chunks(alignment) / m) ** 3
    return 100.0 * fmean * (1 - penalty)


@dataclass
class MetricReport:
    bleu1: float
    bleu2: float
    bleu3: float
    bleu4: float
    rouge_l: float
    meteor: float

    def as_dict(self):
        return asdict(self)


def sentence_report(candidate, reference):
    cand = list(candidate)
    ref = list(reference)
    # an empty candidate scores zero everywhere rather than failing the corpus
    if not cand:
        return MetricReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    return MetricReport(*(bleu(cand, ref, n) for n in (1, 2, 3, 4)),
                        rouge_l(cand, ref), meteor(cand, ref))


def corpus_report(pairs):
    """Arithmetic mean of sentence-level scores over (candidate, reference) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("corpus_report needs at least one pair")
    rows = [sentence_report(c, r).as_dict() for c, r in pairs]
    return MetricReport(**{k: math.fsum(row[k] for row in rows) / len(rows) for k in METRIC_NAMES})


def corpus_bleu(pairs, n=4):
    """Mean sentence-level BLEU-N."""
    pairs = list(pairs)
    return math.fsum(bleu(c, r, n) if c else 0.0 for c, r in pairs) / len(pairs)


def pooled_bleu(pairs, n=4):
    """Corpus BLEU-N from n-gram counts and lengths pooled over all pairs."""
    pairs = [(list(c), list(r)) for c, r in pairs]
    if not pairs or any(not r for _, r in pairs):
        raise EmptyReference("every pair needs a non-empty reference")
    c_len = sum(len(c) for c, _ in pairs)
    r_len = sum(len(r) for _, r in pairs)
    if c_len == 0:
        return 0.0
    log_sum = 0.0
    for k in range(1, n + 1):
        clipped = total = 0
        for cand, ref in pairs:
            cg, rg = _ngrams(cand, k), _ngrams(ref, k)
            clipped += sum(min(v, rg[g]) for g, v in cg.items())
            total += sum(cg.values())
        p = clipped / total if total else 0.0
        log_sum += math.log(p if p > 0 else SMOOTH_EPS)
    return 100.0 * min(brevity_penalty(c_len, r_len) * math.exp(log_sum / n), 1.0)
