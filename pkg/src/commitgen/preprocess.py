"""Dataset ingestion, message normalization, filtering, splitting and vocabularies."""

from __future__ import annotations

import hashlib
import json
import logging
import random
import re
import string
from collections import Counter
from dataclasses import asdict, dataclass, field

from .diffparse import count_chunks
from .errors import (CommitGenError, EmptyAfterNormalization, EmptyContext, SchemaError,
                     TooFewProjects)
from .java.nodes import NodeType

log = logging.getLogger(__name__)

REQUIRED_FIELDS = ("commit_id", "subject", "message", "diff", "file_changed", "project",
                   "timestamp", "functions")
FILE_TOKEN = "<FILE>"
NUMBER_TOKEN = "<NUMBER>"
PLACEHOLDERS = (FILE_TOKEN, NUMBER_TOKEN)
MAX_MESSAGE_TOKENS = 20
MAX_CHUNKS = 5
BOT_FIRST_TOKENS = frozenset({"merge", "rollback", "revert"})


@dataclass
class CommitRecord:
    commit_id: str
    subject: str
    message: str
    diff: str
    file_changed: int
    project: str
    timestamp: int
    functions: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


def _parse_record(obj, lineno):
    if not isinstance(obj, dict):
        raise SchemaError(lineno, "record is not a JSON object")
    for name in REQUIRED_FIELDS:
        if name not in obj:
            raise SchemaError(lineno, name)
    for fn in obj["functions"]:
        for name in ("polarity", "source", "file_path"):
            if name not in fn:
                raise SchemaError(lineno, f"functions.{name}")
        if fn["polarity"] not in ("added", "deleted"):
            raise SchemaError(lineno, "functions.polarity")
    try:
        return CommitRecord(str(obj["commit_id"]), obj["subject"], obj["message"], obj["diff"],
                            int(obj["file_changed"]), str(obj["project"]), int(obj["timestamp"]),
                            list(obj["functions"]))
    except (TypeError, ValueError) as exc:
        raise SchemaError(lineno, f"bad field type ({exc})") from exc


def ingest(path):
    """Read a JSON-lines dataset; blank lines are skipped."""
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(lineno, f"invalid JSON ({exc.msg})") from exc
            rec = _parse_record(obj, lineno)
            if rec.commit_id in seen:
                raise SchemaError(lineno, f"duplicate commit_id {rec.commit_id}")
            seen.add(rec.commit_id)
            records.append(rec)
    return records


def write_jsonl(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


# ---------------------------------------------------------------- lemmatizer

IRREGULAR = {
    "fixed": "fix", "fixes": "fix", "fixing": "fix",
    "made": "make", "makes": "make", "making": "make",
    "was": "be", "were": "be", "is": "be", "are": "be", "been": "be", "being": "be", "am": "be",
    "has": "have", "had": "have", "having": "have",
    "does": "do", "did": "do", "done": "do", "doing": "do",
    "went": "go", "gone": "go", "goes": "go",
    "got": "get", "gotten": "get",
    "wrote": "write", "written": "write", "writes": "write", "writing": "write",
    "ran": "run", "running": "run",
    "built": "build",
    "broke": "break", "broken": "break",
    "took": "take", "taken": "take", "taking": "take",
    "gave": "give", "given": "give", "giving": "give",
    "found": "find",
    "kept": "keep",
    "left": "leave",
    "lost": "lose", "losing": "lose",
    "sent": "send",
    "set": "set", "reset": "reset",
    "split": "split", "put": "put", "cut": "cut", "let": "let", "hit": "hit",
    "threw": "throw", "thrown": "throw",
    "chose": "choose", "chosen": "choose",
    "began": "begin", "begun": "begin",
    "held": "hold",
    "saw": "see", "seen": "see",
    "said": "say",
    "told": "tell",
    "thought": "think",
    "brought": "bring",
    "caught": "catch",
    "hid": "hide", "hidden": "hide",
    "children": "child", "men": "man", "women": "woman", "people": "person",
    "indices": "index", "matrices": "matrix", "vertices": "vertex",
    "data": "data", "analyses": "analysis", "bases": "base",
    "uses": "use", "used": "use", "using": "use",
    "caches": "cache", "cached": "cache", "caching": "cache",
    "changes": "change", "changed": "change", "changing": "change",
    "updates": "update", "updated": "update", "updating": "update",
    "removes": "remove", "removed": "remove", "removing": "remove",
    "creates": "create", "created": "create", "creating": "create",
    "moves": "move", "moved": "move", "moving": "move",
    "handles": "handle", "handled": "handle", "handling": "handle",
    "releases": "release", "released": "release", "releasing": "release",
    "added": "add", "adds": "add", "adding": "add",
    "unused": "unused", "need": "need",
    "this": "this", "its": "its", "his": "his", "us": "us", "yes": "yes", "bus": "bus",
    "status": "status", "statuses": "status", "aliases": "alias", "alias": "alias", "always": "always", "class": "class",
    "process": "process", "access": "access", "address": "address", "less": "less",
    "unless": "unless", "nothing": "nothing", "something": "something", "thing": "thing",
    "string": "string", "during": "during", "bring": "bring", "ring": "ring",
    "speed": "speed", "seed": "seed", "feed": "feed", "embed": "embed",
    "red": "red", "bed": "bed", "shed": "shed",
}

_VOWELS = set("aeiou")


_RESTORE_E = re.compile(r"(?:at|bl|iz|ov|uc|rs|rg|[bcdfgkpstz]l)$")


def _undouble(stem):
    """'stopp' -> 'stop' (keeping ll/ss/zz); 'creat' -> 'create'."""
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in "lsz" and stem[-1] not in _VOWELS:
        return stem[:-1]
    if _RESTORE_E.search(stem):
        return stem + "e"
    return stem


def _rule_step(w):
    """One application of the suffix rules (no irregular lookup)."""
    n = len(w)
    if n > 4 and w.endswith("ies"):
        return w[:-3] + "y"
    if n > 4 and w.endswith(("ches", "shes", "sses", "xes", "zes")):
        return w[:-2]
    if n > 3 and w.endswith("s") and not w.endswith(("ss", "us", "is")):
        return w[:-1]
    if n > 4 and w.endswith("ied"):
        return w[:-3] + "y"
    if n > 4 and w.endswith("ed"):
        stem = w[:-2]
        if not (set(stem) & _VOWELS):
            return w
        return _undouble(stem)
    if n > 5 and w.endswith("ing"):
        stem = w[:-3]
        if not (set(stem) & _VOWELS):
            return w
        return _undouble(stem)
    return w


def lemmatize(word):
    """Base form of a lowercase alphabetic word.

    Rule output is only accepted when it is itself a fixed point of the rules,
    which makes the function idempotent.
    """
    if word in IRREGULAR:
        return IRREGULAR[word]
    r = _rule_step(word)
    if r == word:
        return word
    fixed = IRREGULAR[r] == r if r in IRREGULAR else _rule_step(r) == r
    return r if fixed else word


# ---------------------------------------------------------------- messages

FILE_EXTENSIONS = ("java", "xml", "py", "js", "ts", "c", "h", "cpp", "hpp", "cc", "go", "rs",
                   "kt", "scala", "groovy", "gradle", "properties", "json", "yml", "yaml", "md",
                   "txt", "html", "css", "sh", "sql", "jar", "cfg", "conf", "ini", "csv", "rb")
_FILE_RE = re.compile(r"\.(?:" + "|".join(FILE_EXTENSIONS) + r")(?![A-Za-z0-9])", re.IGNORECASE)
_BOUNDARY_RE = re.compile(r"[.!?](?=\s|$)|\n")
_DIGITS_RE = re.compile(r"[0-9]+(?:\.[0-9]+)*")  # digit runs and version numbers
_PUNCT = string.punctuation


def first_sentence(message):
    m = _BOUNDARY_RE.search(message)
    return message if m is None else message[:m.start()]


def is_file_name(token):
    return bool(_FILE_RE.search(token))


def normalize_message(message):
    """First sentence as a list of lowercase, lemmatized tokens with placeholders."""
    out = []
    for raw in first_sentence(message).split():
        if raw in PLACEHOLDERS:
            out.append(raw)
            continue
        token = raw.strip(_PUNCT)
        if not token:
            continue
        if is_file_name(token):
            out.append(FILE_TOKEN)
            continue
        for piece in token.split("_"):
            piece = piece.strip(_PUNCT)
            if not piece:
                continue
            if _DIGITS_RE.fullmatch(piece):
                out.append(NUMBER_TOKEN)
            else:
                piece = piece.lower()
                out.append(lemmatize(piece) if piece.isalpha() else piece)
    if not out:
        raise EmptyAfterNormalization(f"message {message!r} is empty after normalization")
    return out


# ---------------------------------------------------------------- filtering

FILTER_RULES = ("empty", "non_ascii", "bot", "chunks", "length", "duplicate", "context", "diff")


def filter_commits(records, context_fn=None, counts=None):
    """Apply the dataset filters, keeping record order.

    ``context_fn(record)`` must raise EmptyContext for commits without any
    extractable path; pass None to skip that rule. ``counts`` (a dict) receives
    per-rule drop counts.
    """
    counts = {} if counts is None else counts
    for rule in FILTER_RULES:
        counts.setdefault(rule, 0)

    def drop(rule):
        counts[rule] += 1

    stage = []
    for rec in records:
        try:
            tokens = normalize_message(rec.message)
        except EmptyAfterNormalization:
            drop("empty")
            continue
        if not all(t.isascii() for t in tokens):
            drop("non_ascii")
            continue
        if tokens[0] in BOT_FIRST_TOKENS:
            drop("bot")
            continue
        try:
            n_chunks = count_chunks(rec.diff)
        except CommitGenError:
            drop("diff")
            continue
        if n_chunks > MAX_CHUNKS:
            drop("chunks")
            continue
        if len(tokens) > MAX_MESSAGE_TOKENS:
            drop("length")
            continue
        stage.append((rec, tokens))

    # earliest timestamp wins among duplicates; input order breaks ties
    best = {}
    for pos, (rec, tokens) in enumerate(stage):
        key = (rec.diff, tuple(tokens))
        if key not in best or rec.timestamp < stage[best[key]][0].timestamp:
            best[key] = pos
    keep_pos = set(best.values())
    counts["duplicate"] += len(stage) - len(keep_pos)

    kept = []
    for pos, (rec, _) in enumerate(stage):
        if pos not in keep_pos:
            continue
        if context_fn is not None:
            try:
                context_fn(rec)
            except EmptyContext:
                drop("context")
                continue
            except CommitGenError as exc:
                log.warning("commit %s dropped: %s", rec.commit_id, exc)
                drop("context")
                continue
        kept.append(rec)
    return kept


# ---------------------------------------------------------------- splits

@dataclass
class SplitSpec:
    strategy: str = "by_commit"
    fractions: tuple = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in ("by_commit", "by_project", "by_timestamp"):
            raise ValueError(f"unknown split strategy {self.strategy!r}")
        if abs(sum(self.fractions) - 1.0) > 1e-9 or min(self.fractions) < 0:
            raise ValueError("split fractions must be non-negative and sum to 1")


def _by_commit(records, spec):
    order = list(range(len(records)))
    random.Random(spec.seed).shuffle(order)
    n = len(records)
    n_valid = round(n * spec.fractions[1])
    n_test = round(n * spec.fractions[2])
    n_train = n - n_valid - n_test
    pick = [records[i] for i in order]
    return {"train": pick[:n_train], "valid": pick[n_train:n_train + n_valid],
            "test": pick[n_train + n_valid:]}


def _by_project(records, spec):
    groups = {}
    for r in records:
        groups.setdefault(r.project, []).append(r)
    if len(groups) < 3:
        raise TooFewProjects(f"by_project needs at least 3 projects, got {len(groups)}")
    names = sorted(groups)
    random.Random(spec.seed).shuffle(names)
    names.sort(key=lambda p: -len(groups[p]))  # stable: largest first, seeded among equals
    total = len(records)
    targets = dict(zip(("train", "valid", "test"), (f * total for f in spec.fractions)))
    assigned = {"train": [], "valid": [], "test": []}
    sizes = dict.fromkeys(assigned, 0)
    # make sure every split receives at least one project
    for split_name, project in zip(("train", "valid", "test"), names[:3]):
        assigned[split_name].append(project)
        sizes[split_name] += len(groups[project])
    for project in names[3:]:
        split_name = max(assigned, key=lambda s: (targets[s] - sizes[s], s == "train"))
        assigned[split_name].append(project)
        sizes[split_name] += len(groups[project])
    chosen = {p: s for s, ps in assigned.items() for p in ps}
    return {s: [r for r in records if chosen[r.project] == s] for s in assigned}


def _by_timestamp(records, spec):
    test_frac = spec.fractions[2]
    valid_frac = spec.fractions[1]
    out = {"train": [], "valid": [], "test": []}
    groups = {}
    for r in records:
        groups.setdefault(r.project, []).append(r)
    for project in sorted(groups):
        chrono = sorted(groups[project], key=lambda r: (r.timestamp, r.commit_id))
        n = len(chrono)
        n_test = round(n * test_frac)
        train_all = chrono[:n - n_test]
        n_valid = round(len(train_all) * valid_frac)
        out["test"].extend(chrono[n - n_test:])
        out["valid"].extend(train_all[len(train_all) - n_valid:])
        out["train"].extend(train_all[:len(train_all) - n_valid])
    return out


def split(records, spec):
    """Partition into {"train", "valid", "test"}; splits are disjoint and cover the input."""
    if spec.strategy == "by_commit":
        return _by_commit(records, spec)
    if spec.strategy == "by_project":
        return _by_project(records, spec)
    return _by_timestamp(records, spec)


# ---------------------------------------------------------------- vocabularies

PAD, UNK, SOS, EOS = "<PAD>", "<UNK>", "<SOS>", "<EOS>"
RESERVED = (PAD, UNK, SOS, EOS)
PAD_ID, UNK_ID, SOS_ID, EOS_ID = range(4)
MIN_FREQ = 2


class Vocabulary:
    """Token <-> index map with reserved indices 0..3."""

    def __init__(self, kind, tokens=()):
        self.kind = kind
        self.itos = list(RESERVED)
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        for t in tokens:
            self.add(t)

    def add(self, token):
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def index(self, token):
        return self.stoi.get(token, UNK_ID)

    def encode(self, tokens):
        return [self.index(t) for t in tokens]

    def decode(self, indices, strip=True):
        out = []
        for i in indices:
            if strip and i == EOS_ID:
                break
            if strip and i in (PAD_ID, SOS_ID):
                continue
            out.append(self.itos[i])
        return out

    def to_json(self):
        return {"kind": self.kind, "tokens": self.itos[len(RESERVED):]}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["kind"], obj["tokens"])

    def digest(self):
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    @classmethod
    def from_counts(cls, kind, counts, min_freq=MIN_FREQ):
        # frequency-descending, ties alphabetical, for a stable index order
        items = sorted(((t, c) for t, c in counts.items() if c >= min_freq),
                       key=lambda tc: (-tc[1], tc[0]))
        return cls(kind, [t for t, _ in items])


_CAMEL_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|[0-9]+|[^A-Za-z0-9_]+")


def split_subtokens(leaf):
    """camelCase / underscore / digit-boundary split, lowercased."""
    pieces = []
    for part in leaf.split("_"):
        pieces.extend(m.group().lower() for m in _CAMEL_RE.finditer(part))
    return [p for p in pieces if p.strip()]


def node_type_vocab():
    return Vocabulary("node_type", [t.name for t in NodeType])


def build_vocab(messages, path_sets, min_freq=MIN_FREQ):
    """Vocabularies from the training split.

    ``messages`` are normalized token lists; ``path_sets`` are PathContextSets.
    """
    sub_counts = Counter()
    for ctx in path_sets:
        for path in list(ctx.added) + list(ctx.deleted):
            sub_counts.update(split_subtokens(path.start_leaf))
            sub_counts.update(split_subtokens(path.end_leaf))
    tgt_counts = Counter(t for msg in messages for t in msg)
    return {"subtoken": Vocabulary.from_counts("subtoken", sub_counts, min_freq),
            "node_type": node_type_vocab(),
            "target": Vocabulary.from_counts("target", tgt_counts, min_freq)}
