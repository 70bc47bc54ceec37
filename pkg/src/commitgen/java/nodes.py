"""AST node representation and the closed node-type enumeration."""

from __future__ import annotations

import enum

GRAMMAR_VERSION = "java-subset-1"


class NodeType(enum.IntEnum):
    CompilationUnit = 0
    ClassDecl = 1
    FieldDecl = 2
    MethodDeclaration = 3
    Parameter = 4
    PrimitiveType = 5
    ClassOrInterfaceType = 6
    ArrayType = 7
    VoidType = 8
    BlockStmt = 9
    ExpressionStmt = 10
    IfStmt = 11
    ForStmt = 12
    ForEachStmt = 13
    WhileStmt = 14
    DoStmt = 15
    ReturnStmt = 16
    BreakStmt = 17
    ContinueStmt = 18
    ThrowStmt = 19
    TryStmt = 20
    CatchClause = 21
    VariableDeclarationExpr = 22
    VariableDeclarator = 23
    AssignExpr = 24
    BinaryExpr = 25
    UnaryExpr = 26
    MethodCallExpr = 27
    FieldAccess = 28
    NameExpr = 29
    LiteralExpr = 30
    ObjectCreationExpr = 31
    ArrayAccessExpr = 32
    ArrayCreationExpr = 33
    CastExpr = 34
    ConditionalExpr = 35
    EnclosedExpr = 36
    ArgumentList = 37
    InstanceOfExpr = 38
    UnknownStmt = 39


assert len(NodeType) == 40


class AstNode:
    """Either an interior node (``node_type`` set) or a leaf (``leaf_value`` set).

    Interior nodes may have no children (an empty ``{}`` block, for instance);
    leaves never have children.
    """

    __slots__ = ("node_type", "leaf_value", "leaf_kind", "children", "start_line",
                 "end_line", "parent", "attrs")

    def __init__(self, node_type=None, children=(), start_line=1, end_line=None,
                 leaf_value=None, leaf_kind=None, attrs=None):
        if (node_type is None) == (leaf_value is None):
            raise ValueError("exactly one of node_type / leaf_value must be set")
        if leaf_value is not None and children:
            raise ValueError("leaves cannot have children")
        self.node_type = node_type
        self.leaf_value = leaf_value
        self.leaf_kind = leaf_kind
        self.children = list(children)
        self.start_line = start_line
        self.end_line = start_line if end_line is None else end_line
        self.parent = None
        self.attrs = attrs or {}
        for c in self.children:
            c.parent = self

    @classmethod
    def leaf(cls, value, line, kind="identifier"):
        return cls(leaf_value=value, leaf_kind=kind, start_line=line, end_line=line)

    @property
    def is_leaf(self):
        return self.leaf_value is not None

    @property
    def label(self):
        return self.leaf_value if self.is_leaf else self.node_type.name

    def append(self, child):
        child.parent = self
        self.children.append(child)
        self.start_line = min(self.start_line, child.start_line)
        self.end_line = max(self.end_line, child.end_line)

    def walk(self):
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self):
        return [n for n in self.walk() if n.is_leaf]

    def find_all(self, node_type):
        return [n for n in self.walk() if n.node_type is node_type]

    def to_sexpr(self):
        if self.is_leaf:
            return self.leaf_value
        inner = " ".join(c.to_sexpr() for c in self.children)
        return f"({self.node_type.name}{' ' + inner if inner else ''})"

    def __repr__(self):
        if self.is_leaf:
            return f"Leaf({self.leaf_value!r}@{self.start_line})"
        return f"{self.node_type.name}[{self.start_line}-{self.end_line}]"
