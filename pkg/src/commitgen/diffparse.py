"""Unified git-diff parsing and changed-token extraction."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .errors import BadHunkHeader, MalformedDiff
from .java.lexer import tokenize

log = logging.getLogger(__name__)

_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")
_GIT_HEADER_RE = re.compile(r"^diff --git (?:\"?a/(.*?)\"?) (?:\"?b/(.*?)\"?)$")


@dataclass
class Hunk:
    old_start: int
    old_count: int
    new_start: int
    new_count: int
    deleted_lines: list = field(default_factory=list)
    added_lines: list = field(default_factory=list)
    context_lines: list = field(default_factory=list)
    # file line numbers of each changed line (old side for deletions, new side for additions)
    deleted_numbers: list = field(default_factory=list)
    added_numbers: list = field(default_factory=list)


@dataclass
class DiffChunk:
    file_path: str
    hunks: list = field(default_factory=list)
    binary: bool = False

    @property
    def is_java(self):
        # a bare hunk carries no path and is assumed to be java
        return not self.file_path or self.file_path.endswith(".java")


@dataclass
class DiffToken:
    text: str
    kind: str


@dataclass
class TokenGroups:
    added: list = field(default_factory=list)
    deleted: list = field(default_factory=list)
    unlexable: int = 0

    def texts(self, polarity):
        return [t.text for t in getattr(self, polarity)]

    def all_texts(self):
        return [t.text for t in self.added] + [t.text for t in self.deleted]


def _parse_hunk_header(line, index):
    m = _HUNK_RE.match(line)
    if m is None:
        raise BadHunkHeader(index, line)
    a, b, c, d = m.groups()
    hunk = Hunk(int(a), 1 if b is None else int(b), int(c), 1 if d is None else int(d))
    return hunk


def parse_diff(raw):
    """Parse unified diff text into per-file chunks.

    A bare diff with hunks but no ``diff --git`` header yields one chunk with
    an empty file path (or the ``+++`` path when present).
    """
    if not raw or not raw.strip():
        raise MalformedDiff("empty diff")
    lines = raw.replace("\r\n", "\n").split("\n")
    chunks = []
    current = None
    hunk = None
    old_line = new_line = 0
    saw_header = False

    for index, line in enumerate(lines):
        if line.startswith("diff --git "):
            saw_header = True
            m = _GIT_HEADER_RE.match(line)
            path = m.group(2) if m else line.split()[-1].removeprefix("b/")
            current = DiffChunk(path)
            chunks.append(current)
            hunk = None
            continue
        if line.startswith("@@"):
            saw_header = True
            hunk = _parse_hunk_header(line, index)
            if current is None:
                current = DiffChunk("")
                chunks.append(current)
            current.hunks.append(hunk)
            old_line, new_line = hunk.old_start, hunk.new_start
            continue
        if hunk is None:
            # file-level metadata between header and first hunk
            if current is None and line.startswith("--- "):
                current = DiffChunk("")
                chunks.append(current)
            elif current is not None:
                if line.startswith("Binary files") or line.startswith("GIT binary patch"):
                    current.binary = True
                    log.warning("skipping binary file section %s", current.file_path)
                elif line.startswith("+++ ") and not current.file_path:
                    current.file_path = line[4:].strip().removeprefix("b/")
            continue
        if line.startswith("\\"):
            continue  # "\ No newline at end of file"
        if line.startswith("--- ") and not _hunk_open(hunk):
            # next file of a header-less multi-file diff
            current = DiffChunk("")
            chunks.append(current)
            hunk = None
            continue
        if line.startswith("-"):
            hunk.deleted_lines.append(line[1:])
            hunk.deleted_numbers.append(old_line)
            old_line += 1
        elif line.startswith("+"):
            hunk.added_lines.append(line[1:])
            hunk.added_numbers.append(new_line)
            new_line += 1
        elif line.startswith(" ") or (line == "" and index < len(lines) - 1 and _hunk_open(hunk)):
            hunk.context_lines.append(line[1:])
            old_line += 1
            new_line += 1
        else:
            hunk = None  # trailing junk closes the hunk
    if not saw_header or not chunks:
        raise MalformedDiff("no 'diff --git' header or '@@' hunk found")
    return chunks


def _hunk_open(hunk):
    """True while the hunk has not yet consumed its declared line counts."""
    used_old = len(hunk.deleted_lines) + len(hunk.context_lines)
    used_new = len(hunk.added_lines) + len(hunk.context_lines)
    return used_old < hunk.old_count or used_new < hunk.new_count


def count_chunks(raw):
    """Number of hunks across all files."""
    return sum(len(c.hunks) for c in parse_diff(raw))


def changed_line_numbers(chunks):
    """file path -> {"added": [...], "deleted": [...]} for java chunks."""
    out = {}
    for chunk in chunks:
        if chunk.binary or not chunk.is_java:
            continue
        entry = out.setdefault(chunk.file_path, {"added": [], "deleted": []})
        for h in chunk.hunks:
            entry["added"].extend(h.added_numbers)
            entry["deleted"].extend(h.deleted_numbers)
    return out


def lex_line(line, stats=None):
    """Non-punctuation tokens of one source line."""
    return [DiffToken(t.text, t.kind) for t in tokenize(line, strict=False, stats=stats)
            if t.kind != "punct"]


def tokenize_changes(chunks):
    """Lex the '+'/'-' lines of java chunks into added/deleted token lists."""
    groups = TokenGroups()
    stats = {}
    for chunk in chunks:
        if chunk.binary or not chunk.is_java:
            continue
        for h in chunk.hunks:
            for line in h.deleted_lines:
                groups.deleted.extend(lex_line(line, stats))
            for line in h.added_lines:
                groups.added.extend(lex_line(line, stats))
    groups.unlexable = stats.get("unlexable", 0)
    if groups.unlexable:
        log.warning("%d unlexable characters kept as literal tokens", groups.unlexable)
    return groups
