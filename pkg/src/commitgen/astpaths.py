"""Function location and shortest leaf-to-leaf AST path extraction."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import EmptyContext, LeafNotInTree, NoEnclosingFunction
from .java.nodes import AstNode, NodeType
from .java.parser import parse_compilation_unit

MAX_PATH_NODES = 12
MAX_PATHS = 80
ADDED = "added"
DELETED = "deleted"
POLARITIES = (ADDED, DELETED)


@dataclass
class FunctionAst:
    name: str
    ast: AstNode
    file_path: str = ""
    polarity: str = ADDED


@dataclass(frozen=True)
class AstPath:
    start_leaf: str
    node_sequence: tuple
    end_leaf: str

    @property
    def edges(self):
        return len(self.node_sequence) + 1

    def reversed(self):
        return AstPath(self.end_leaf, tuple(reversed(self.node_sequence)), self.start_leaf)

    def to_json(self):
        return [self.start_leaf, [n.name for n in self.node_sequence], self.end_leaf]

    @classmethod
    def from_json(cls, row):
        start, nodes, end = row
        return cls(start, tuple(NodeType[n] for n in nodes), end)


@dataclass
class PathContextSet:
    added: list = field(default_factory=list)
    deleted: list = field(default_factory=list)

    @property
    def p(self):
        return len(self.added)

    @property
    def k(self):
        return len(self.deleted)

    def to_json(self):
        return {"added": [x.to_json() for x in self.added],
                "deleted": [x.to_json() for x in self.deleted]}

    @classmethod
    def from_json(cls, obj):
        return cls([AstPath.from_json(r) for r in obj["added"]],
                   [AstPath.from_json(r) for r in obj["deleted"]])


def _method_name(method):
    for child in method.children:
        if child.is_leaf:
            return child.leaf_value
    return ""


def parse_function(source, file_path="", polarity=ADDED, first_line=1):
    """Parse ``source`` and return its first method as a FunctionAst."""
    unit = parse_compilation_unit(source, first_line=first_line)
    methods = unit.find_all(NodeType.MethodDeclaration)
    if not methods:
        raise NoEnclosingFunction("source contains no method declaration")
    m = methods[0]
    m.parent = None
    return FunctionAst(_method_name(m), m, file_path, polarity)


def methods_in(unit):
    return unit.find_all(NodeType.MethodDeclaration)


def locate_function(file_source, file_path, line, polarity, first_line=1, unit=None):
    """Innermost method whose span contains ``line`` (file coordinates)."""
    if unit is None:
        unit = parse_compilation_unit(file_source, first_line=first_line)
    best = None
    for m in methods_in(unit):
        if m.start_line <= line <= m.end_line:
            if best is None or (m.end_line - m.start_line) < (best.end_line - best.start_line) \
                    or _is_ancestor(best, m):
                best = m
    if best is None:
        raise NoEnclosingFunction(f"{file_path}:{line} is outside every method")
    return FunctionAst(_method_name(best), best, file_path, polarity)


def _is_ancestor(a, b):
    node = b.parent
    while node is not None:
        if node is a:
            return True
        node = node.parent
    return False


def _ancestors(node, root):
    """Interior nodes from node's parent up to ``root`` inclusive."""
    chain = []
    cur = node.parent
    while cur is not None:
        chain.append(cur)
        if cur is root:
            return chain
        cur = cur.parent
    return None


def shortest_path(ast, leaf_a, leaf_b):
    """Unique tree path between two distinct leaf occurrences via their LCA."""
    if leaf_a is leaf_b:
        raise ValueError("leaf_a and leaf_b must be distinct occurrences")
    up_a = _ancestors(leaf_a, ast) if leaf_a.is_leaf else None
    up_b = _ancestors(leaf_b, ast) if leaf_b.is_leaf else None
    if up_a is None or up_b is None:
        raise LeafNotInTree("leaf does not belong to this tree")
    ids_b = {id(n): i for i, n in enumerate(up_b)}
    for i, n in enumerate(up_a):
        j = ids_b.get(id(n))
        if j is not None:
            nodes = up_a[:i + 1] + list(reversed(up_b[:j]))
            return AstPath(leaf_a.leaf_value, tuple(x.node_type for x in nodes), leaf_b.leaf_value)
    raise LeafNotInTree("leaves share no ancestor")  # unreachable for a proper tree


def _changed_leaves(function, lines):
    return [(pos, leaf) for pos, leaf in enumerate(function.ast.leaves()) if leaf.start_line in lines]


def candidate_paths(functions, changed_lines, polarity, max_path_nodes=MAX_PATH_NODES):
    """All length-filtered paths for one polarity, in canonical order."""
    keyed = []
    for fn in functions:
        if fn.polarity != polarity:
            continue
        lines = set(changed_lines.get(fn.file_path, {}).get(polarity, ()))
        leaves = _changed_leaves(fn, lines)
        for i in range(len(leaves)):
            for j in range(i + 1, len(leaves)):
                (pa, a), (pb, b) = leaves[i], leaves[j]
                path = shortest_path(fn.ast, a, b)
                if len(path.node_sequence) <= max_path_nodes:
                    keyed.append(((fn.file_path, fn.ast.start_line, pa, pb), path))
    keyed.sort(key=lambda kv: kv[0])
    return [p for _, p in keyed]


def sample_paths(paths, cap, seed):
    if len(paths) <= cap:
        return list(paths)
    keep = sorted(random.Random(seed).sample(range(len(paths)), cap))
    return [paths[i] for i in keep]


def extract_path_contexts(functions, changed_lines, seed, max_paths=MAX_PATHS,
                          max_path_nodes=MAX_PATH_NODES):
    """Bounded added/deleted path sets for one commit.

    ``changed_lines`` maps file path -> {"added": lines, "deleted": lines}.
    Functions sharing (file, polarity, span) are considered once.
    """
    seen = set()
    unique = []
    for fn in functions:
        key = (fn.file_path, fn.polarity, fn.ast.start_line, fn.ast.end_line, fn.name)
        if key not in seen:
            seen.add(key)
            unique.append(fn)
    added = sample_paths(candidate_paths(unique, changed_lines, ADDED, max_path_nodes), max_paths, seed)
    deleted = sample_paths(candidate_paths(unique, changed_lines, DELETED, max_path_nodes), max_paths, seed)
    if not added and not deleted:
        raise EmptyContext("no AST paths in either polarity")
    return PathContextSet(added, deleted)
