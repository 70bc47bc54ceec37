"""Per-commit feature extraction: diff tokens, located functions and path contexts."""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass

from .astpaths import (MAX_PATH_NODES, MAX_PATHS, PathContextSet, extract_path_contexts,
                       locate_function)
from .diffparse import (DiffToken, TokenGroups, changed_line_numbers, parse_diff,
                        tokenize_changes)
from .errors import DataError, NoEnclosingFunction
from .java.parser import parse_compilation_unit
from .preprocess import normalize_message

log = logging.getLogger(__name__)


@dataclass
class CommitFeatures:
    commit_id: str
    tokens: TokenGroups
    contexts: PathContextSet
    message: list

    @property
    def diff_tokens(self):
        """Added then deleted token texts: the retrieval and ranking view of a diff."""
        return self.tokens.all_texts()

    def to_json(self):
        return {"commit_id": self.commit_id,
                "tokens": {"added": [[t.text, t.kind] for t in self.tokens.added],
                           "deleted": [[t.text, t.kind] for t in self.tokens.deleted],
                           "unlexable": self.tokens.unlexable},
                "contexts": self.contexts.to_json(), "message": list(self.message)}

    @classmethod
    def from_json(cls, obj):
        tok = obj["tokens"]
        groups = TokenGroups([DiffToken(*t) for t in tok["added"]],
                             [DiffToken(*t) for t in tok["deleted"]], tok.get("unlexable", 0))
        return cls(obj["commit_id"], groups, PathContextSet.from_json(obj["contexts"]),
                   list(obj["message"]))


def commit_seed(seed, commit_id):
    """Per-commit sampling seed, independent of corpus order."""
    return (int(seed) * 1_000_003 + zlib.crc32(commit_id.encode())) & 0x7FFFFFFF


def _paths_match(diff_path, fn_path):
    return diff_path == fn_path or diff_path.endswith("/" + fn_path) or fn_path.endswith("/" + diff_path)


def locate_functions(record, changed):
    """FunctionAsts enclosing every changed line, per polarity."""
    found = []
    for entry in record.functions:
        polarity = entry["polarity"]
        lines = []
        for diff_path, by_pol in changed.items():
            if _paths_match(diff_path, entry["file_path"]):
                lines.extend(by_pol[polarity])
        if not lines:
            continue
        try:
            unit = parse_compilation_unit(entry["source"], first_line=int(entry.get("start_line", 1)))
        except DataError as exc:
            log.warning("commit %s: cannot parse %s (%s)", record.commit_id, entry["file_path"], exc)
            continue
        for line in sorted(set(lines)):
            try:
                fn = locate_function(entry["source"], entry["file_path"], line, polarity, unit=unit)
            except NoEnclosingFunction:
                continue
            found.append(fn)
    return found


def _normalized_changed(record, changed):
    # function entries name the file the way the record does; rekey to those names
    out = {}
    for entry in record.functions:
        for diff_path, by_pol in changed.items():
            if _paths_match(diff_path, entry["file_path"]):
                slot = out.setdefault(entry["file_path"], {"added": [], "deleted": []})
                for pol in ("added", "deleted"):
                    slot[pol] = sorted(set(slot[pol]) | set(by_pol[pol]))
    return out


def extract_contexts(record, seed=0, max_paths=MAX_PATHS, max_path_nodes=MAX_PATH_NODES):
    """PathContextSet for one commit (raises EmptyContext when nothing is extractable)."""
    chunks = parse_diff(record.diff)
    changed = changed_line_numbers(chunks)
    functions = locate_functions(record, changed)
    return extract_path_contexts(functions, _normalized_changed(record, changed),
                                 commit_seed(seed, record.commit_id), max_paths, max_path_nodes)


def featurize(record, seed=0, max_paths=MAX_PATHS, max_path_nodes=MAX_PATH_NODES):
    chunks = parse_diff(record.diff)
    return CommitFeatures(record.commit_id, tokenize_changes(chunks),
                          extract_contexts(record, seed, max_paths, max_path_nodes),
                          normalize_message(record.message))
