"""Deterministic synthetic Java commit corpus for tests and demos.

Each commit edits one line inside one method of a small class. Messages are
built only from words that also appear on the changed lines, so a model that
reads the change can in principle reproduce the message exactly.
"""

from __future__ import annotations

import difflib
import random

from .preprocess import CommitRecord

VARIABLES = ("count", "size", "limit", "timeout", "buffer", "offset", "total", "depth")
CALLEES = ("flush", "close", "reset", "clear", "refresh", "sync")
METHODS = ("load", "save", "parse", "render", "update", "apply")
CLASSES = ("Cache", "Reader", "Writer", "Parser", "Client", "Server", "Queue", "Store")
PROJECTS = ("alpha", "beta", "gamma", "delta")
NUMBERS = (8, 16, 30, 64, 100, 250)

TEMPLATES = ("null_check", "remove_var", "change_limit", "swap_call", "rename", "add_log")


def _method(name, body_lines, indent="    "):
    lines = [f"{indent}public void {name}(String input) {{"]
    lines += [f"{indent}    {b}" for b in body_lines]
    lines.append(f"{indent}}}")
    return lines


def _class_source(cls, methods):
    lines = [f"public class {cls} {{", "    private int state = 0;", ""]
    for i, (name, body) in enumerate(methods):
        if i:
            lines.append("")
        lines += _method(name, body)
    lines.append("}")
    return "\n".join(lines) + "\n"


def _edit(template, k, rng):
    """(before line or None, after line or None, message) for one template.

    ``k`` cycles the vocabulary so every word recurs across nearby commits.
    """
    var = VARIABLES[k % len(VARIABLES)]
    if template == "null_check":
        return None, f"if ({var} == null) {{ return; }}", f"add null check for {var}"
    if template == "remove_var":
        callee = CALLEES[k % len(CALLEES)]
        return f"int {var} = {callee}(input);", None, f"remove unused {var} variable"
    if template == "change_limit":
        a, b = rng.sample(NUMBERS, 2)
        return f"int {var} = {a};", f"int {var} = {b};", f"change {var} limit to {b}"
    if template == "swap_call":
        old, new = CALLEES[k % 3], CALLEES[(k + 1) % 3]
        return f"{old}({var});", f"{new}({var});", f"use {new} instead of {old} for {var}"
    if template == "rename":
        old, new = var, VARIABLES[(k + 1) % len(VARIABLES)]
        return (f"int {old} = input.length();", f"int {new} = input.length();",
                f"rename {old} to {new}")
    if template == "add_log":
        return None, f"log({var}, input);", f"add log call for {var}"
    raise ValueError(template)


def _unified(path, before, after):
    body = difflib.unified_diff(before.splitlines(), after.splitlines(), f"a/{path}", f"b/{path}",
                                n=1, lineterm="")
    return f"diff --git a/{path} b/{path}\n" + "\n".join(body) + "\n"


def make_commit(index, rng, project=None, timestamp=None, template=None, extra_statements=0):
    template = template or TEMPLATES[index % len(TEMPLATES)]
    cls = rng.choice(CLASSES)
    names = rng.sample(METHODS, 2)
    target = rng.randrange(2)
    filler = [["state = state + 1;", "process(input);"], ["String copy = input.trim();", "emit(copy);"]]
    before_line, after_line, message = _edit(template, index // len(TEMPLATES), rng)
    bodies_before = [list(f) for f in filler]
    bodies_after = [list(f) for f in filler]
    if before_line is not None:
        bodies_before[target].insert(1, before_line)
    if after_line is not None:
        bodies_after[target].insert(1, after_line)
    # optional added statements widen the change so path caps start to bind
    var = VARIABLES[(index // len(TEMPLATES)) % len(VARIABLES)]
    for j in range(extra_statements):
        bodies_after[target].insert(2 + j, f"state = state + {var}.length() * {j + 2};")
    path = f"src/main/java/{project or 'toy'}/{cls}.java"
    before = _class_source(cls, list(zip(names, bodies_before)))
    after = _class_source(cls, list(zip(names, bodies_after)))
    functions = [{"polarity": "deleted", "source": before, "file_path": path},
                 {"polarity": "added", "source": after, "file_path": path}]
    text = message[0].upper() + message[1:] + "."
    return CommitRecord(commit_id=f"{index:040x}", subject=text, message=text + "\n\nToy change.",
                        diff=_unified(path, before, after), file_changed=1,
                        project=project or "toy",
                        timestamp=1_600_000_000 + 3600 * index if timestamp is None else timestamp,
                        functions=functions)


def make_corpus(n=40, seed=0, extra_statements=0):
    """``n`` commits cycling through the templates and projects."""
    rng = random.Random(seed)
    return [make_commit(i, rng, project=PROJECTS[i % len(PROJECTS)],
                        extra_statements=extra_statements) for i in range(n)]


RANKING_WORDS = tuple(f"w{i}" for i in range(20))
DIFF_NOISE = ("int", "=", "return", "if", "null", "(", "+")


def make_ranking_set(n=200, seed=0, diff_len=14, msg_len=5):
    """Commits with one relevant and one irrelevant candidate message.

    The relevant candidate is built from the commit's own diff words (either
    the reference itself or the reference with one word replaced); the other
    uses only words absent from the diff. Which side plays "retrieved" versus
    "generated" is a coin flip, so neither source dominates on its own.
    """
    rng = random.Random(seed)
    out = []
    for i in range(n):
        words = rng.sample(RANKING_WORDS, diff_len // 2)
        diff = [rng.choice(words + list(DIFF_NOISE)) for _ in range(diff_len)] + words
        reference = rng.sample(words, msg_len)
        outside = [w for w in RANKING_WORDS if w not in words]
        good = list(reference)
        if rng.random() < 0.5:
            good[rng.randrange(msg_len)] = rng.choice(outside)
        bad = rng.sample(outside, msg_len)
        msg_t, msg_g = (good, bad) if rng.random() < 0.5 else (bad, good)
        out.append({"commit_id": f"r{i:04d}", "diff": diff, "reference": reference,
                    "msg_t": msg_t, "msg_g": msg_g})
    return out
