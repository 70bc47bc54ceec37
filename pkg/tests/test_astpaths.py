import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from commitgen.astpaths import (AstPath, PathContextSet, candidate_paths, extract_path_contexts,
                                locate_function, parse_function, sample_paths, shortest_path)
from commitgen.diffparse import lex_line
from commitgen.errors import EmptyContext, LeafNotInTree, NoEnclosingFunction
from commitgen.java.nodes import AstNode, NodeType
from oracles import bfs_distance, build_tree, random_tree

LISTING = '''public void printString(){
    String str = "ATOM"
    for(int i = 0; i < 10; i++){
        print(str);
    }
}'''


def test_shortest_path_matches_bfs_on_random_trees():
    rng = np.random.default_rng(0)
    for _ in range(100):
        parents = random_tree(rng, int(rng.integers(3, 51)))
        nodes, leaves = build_tree(parents, rng)
        for a, b in itertools.combinations(leaves, 2):
            path = shortest_path(nodes[0], nodes[a], nodes[b])
            assert path.edges == bfs_distance(parents, a, b)
            assert shortest_path(nodes[0], nodes[b], nodes[a]) == path.reversed()


def test_sibling_path():
    parent = AstNode(NodeType.BinaryExpr, [AstNode.leaf("a", 1), AstNode.leaf("b", 1)])
    path = shortest_path(parent, *parent.children)
    assert path == AstPath("a", (NodeType.BinaryExpr,), "b") and path.edges == 2


def test_leaf_not_in_tree():
    tree = AstNode(NodeType.BinaryExpr, [AstNode.leaf("a", 1), AstNode.leaf("b", 1)])
    other = AstNode(NodeType.NameExpr, [AstNode.leaf("c", 1)])
    with pytest.raises(LeafNotInTree):
        shortest_path(tree, tree.children[0], other.children[0])


def test_listing_str_to_str_path():
    fn = parse_function(LISTING)
    first, second = [l for l in fn.ast.leaves() if l.leaf_value == "str"]
    names = [n.name for n in shortest_path(fn.ast, first, second).node_sequence]
    assert "ExpressionStmt" in names and "ForStmt" in names
    # the method body block is the lowest common ancestor
    assert names[names.index("ExpressionStmt") + 1] == "BlockStmt"


SOURCE = "\n".join([
    "class A {",            # 1
    "  void one() {",       # 2
    "    a();",             # 3
    "    b();",             # 4
    "  }",                  # 5
    "",                     # 6
    "  void two() {",       # 7
    "    c();",             # 8
    "    d(e, f);",         # 9
    "    g();",             # 10
    "    h();",             # 11
    "  }",                  # 12
    "}",
])


def test_locate_function_containment():
    assert locate_function(SOURCE, "A.java", 9, "added").name == "two"
    assert locate_function(SOURCE, "A.java", 3, "deleted").polarity == "deleted"
    with pytest.raises(NoEnclosingFunction):
        locate_function(SOURCE, "A.java", 6, "added")


def test_locate_innermost_nested_method():
    src = "class A {\n  void f() {\n    class L {\n      void g() {\n      }\n    }\n  }\n}\n"
    assert locate_function(src, "A.java", 4, "added").name == "g"
    assert locate_function(src, "A.java", 2, "added").name == "f"


def test_five_changed_leaves_give_ten_pairs():
    fn = parse_function("void f() {\n  a(b, c, d, e);\n}", "F.java")
    paths = candidate_paths([fn], {"F.java": {"added": [2]}}, "added", max_path_nodes=99)
    assert len(paths) == math.comb(5, 2)


def test_single_leaf_yields_empty_context():
    fn = parse_function("void f() {\n  a();\n}", "F.java")
    with pytest.raises(EmptyContext):
        extract_path_contexts([fn], {"F.java": {"added": [2], "deleted": []}}, seed=0)


def _wide_function():
    # 21 leaves on one line -> C(21, 2) = 210 candidate pairs
    args = ", ".join(f"x{i}" for i in range(20))
    return parse_function("void f() {\n" + f"  a({args});\n" + "}", "W.java")


def test_cap_and_determinism():
    fn = _wide_function()
    changed = {"W.java": {"added": [2], "deleted": []}}
    full = candidate_paths([fn], changed, "added", max_path_nodes=99)
    assert len(full) == 210
    a = extract_path_contexts([fn], changed, seed=7, max_path_nodes=99)
    b = extract_path_contexts([fn], changed, seed=7, max_path_nodes=99)
    assert a.p == 80 and a.k == 0 and a == b
    c = extract_path_contexts([fn], changed, seed=8, max_path_nodes=99)
    assert c.added != a.added


def test_path_length_filter():
    fn = parse_function(LISTING, "L.java")
    changed = {"L.java": {"added": list(range(1, 7))}}
    long_ok = candidate_paths([fn], changed, "added", max_path_nodes=99)
    short = candidate_paths([fn], changed, "added", max_path_nodes=3)
    assert all(len(p.node_sequence) <= 3 for p in short)
    assert len(short) < len(long_ok)


@given(st.lists(st.integers(0, 199), unique=True, max_size=200), st.integers(0, 2**31 - 1),
       st.integers(1, 100))
def test_sample_paths_properties(items, seed, cap):
    out = sample_paths(items, cap, seed)
    assert len(out) == min(cap, len(items))
    assert out == sample_paths(items, cap, seed)
    # order preserved relative to the canonical input order
    pos = {v: i for i, v in enumerate(items)}
    assert [pos[v] for v in out] == sorted(pos[v] for v in out)


@given(st.lists(st.sampled_from(["n", "m", "k"]), min_size=1, max_size=4),
       st.lists(st.sampled_from(["p", "q"]), min_size=1, max_size=4))
def test_path_leaves_come_from_changed_tokens(left, right):
    line = f"    r = {' + '.join(left)} * s({', '.join(right)});"
    fn = parse_function("void f() {\n" + line + "\n}", "P.java")
    ctx = extract_path_contexts([fn], {"P.java": {"added": [2], "deleted": []}}, seed=1)
    texts = {t.text for t in lex_line(line)}
    assert ctx.p <= 80 and ctx.k == 0
    for path in ctx.added:
        assert path.start_leaf in texts and path.end_leaf in texts


def test_context_json_round_trip():
    fn = parse_function(LISTING, "L.java")
    ctx = extract_path_contexts([fn], {"L.java": {"added": [2, 3]}}, seed=0)
    assert PathContextSet.from_json(ctx.to_json()) == ctx
