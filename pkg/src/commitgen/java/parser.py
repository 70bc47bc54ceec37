"""Recursive-descent parser for the supported Java subset.

Statements the grammar does not cover (switch, lambdas, labels, method
references, ...) become ``UnknownStmt`` nodes whose identifier and literal
tokens hang underneath as leaves, so parsing a method body never fails on
a subset gap. Structural problems (illegal characters, unbalanced braces)
still raise.
"""

from __future__ import annotations

from ..errors import UnbalancedBraces
from .lexer import PRIMITIVE_TYPES, Token, tokenize
from .nodes import AstNode, NodeType as T

MODIFIERS = frozenset("""
public private protected static final abstract synchronized native transient
volatile strictfp default sealed non-sealed
""".split())

ASSIGN_OPS = frozenset("= += -= *= /= %= &= |= ^= <<= >>= >>>=".split())

BINARY_PRECEDENCE = {
    "||": 1, "&&": 2, "|": 3, "^": 4, "&": 5,
    "==": 6, "!=": 6,
    "<": 7, ">": 7, "<=": 7, ">=": 7, "instanceof": 7,
    "<<": 8, ">>": 8, ">>>": 8,
    "+": 9, "-": 9,
    "*": 10, "/": 10, "%": 10,
}

_EOF = Token("eof", "", 0, 0)


class ParseError(Exception):
    pass


def check_braces(tokens):
    depth = 0
    opened = 0
    for tok in tokens:
        if tok.kind != "punct":
            continue
        if tok.text == "{":
            depth += 1
            opened += 1
        elif tok.text == "}":
            depth -= 1
            if depth < 0:
                raise UnbalancedBraces(f"unexpected '}}' at line {tok.line}")
    if depth != 0:
        raise UnbalancedBraces(f"{depth} unclosed '{{'")
    if opened == 0:
        raise UnbalancedBraces("no braces: nothing to parse")


def parse_compilation_unit(source, first_line=1):
    """Parse a compilation unit (or bare member list) into a CompilationUnit node.

    ``first_line`` is the file line number of the first source line, so node
    spans are reported in file coordinates.
    """
    tokens = tokenize(source, strict=True, first_line=first_line)
    check_braces(tokens)
    return _Parser(tokens).compilation_unit()


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.pos = 0

    # -- token helpers --------------------------------------------------
    def peek(self, k=0):
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else _EOF

    def at(self, text, k=0):
        t = self.peek(k)
        return t.text == text and t.kind in ("keyword", "operator", "punct")

    def next(self):
        t = self.peek()
        if t is _EOF:
            raise ParseError("unexpected end of input")
        self.pos += 1
        return t

    def expect(self, text):
        t = self.peek()
        if not self.at(text):
            raise ParseError(f"expected {text!r} at line {t.line}, found {t.text!r}")
        self.pos += 1
        return t

    def accept(self, text):
        if self.at(text):
            self.pos += 1
            return True
        return False

    def ident(self):
        t = self.peek()
        if t.kind != "identifier" and not (t.kind == "keyword" and t.text == "var"):
            raise ParseError(f"expected identifier at line {t.line}, found {t.text!r}")
        self.pos += 1
        return t

    def prev_line(self):
        return self.toks[self.pos - 1].line if self.pos else 1

    def node(self, node_type, children, start_tok, **attrs):
        end = self.prev_line()
        n = AstNode(node_type, [c for c in children if c is not None],
                    start_line=start_tok.line, end_line=max(end, start_tok.line), attrs=attrs)
        for c in n.children:
            n.start_line = min(n.start_line, c.start_line)
            n.end_line = max(n.end_line, c.end_line)
        return n

    @staticmethod
    def leaf(tok):
        kind = tok.kind if tok.kind in ("identifier", "literal") else "keyword"
        return AstNode.leaf(tok.text, tok.line, kind)

    def end_statement(self):
        """Consume ``;``; tolerate a missing one before a line break or ``}``."""
        if self.accept(";"):
            return
        t = self.peek()
        if t is _EOF or self.at("}") or t.line > self.prev_line():
            return
        raise ParseError(f"expected ';' at line {t.line}, found {t.text!r}")

    def skip_balanced(self, open_, close):
        depth = 0
        while True:
            t = self.next()
            if t.text == open_:
                depth += 1
            elif t.text == close:
                depth -= 1
                if depth == 0:
                    return

    def skip_type_args(self):
        """Skip ``<...>``; returns identifier leaves found inside."""
        leaves = []
        depth = 0
        while True:
            t = self.next()
            if t.kind in ("operator", "punct") and set(t.text) <= {"<", ">"}:
                depth += t.text.count("<") - t.text.count(">")
                if depth <= 0:
                    return leaves
            elif t.kind == "identifier":
                leaves.append(self.leaf(t))
            elif t.text in ("{", "}", ";", "(", ")", "="):
                raise ParseError("not a type argument list")

    def skip_annotations_and_modifiers(self):
        while True:
            t = self.peek()
            if self.at("@") and not self.at("interface", 1):
                self.next()
                self.ident()
                while self.at(".") and self.peek(1).kind == "identifier":
                    self.pos += 2
                if self.at("("):
                    self.skip_balanced("(", ")")
            elif t.kind == "keyword" and t.text in MODIFIERS:
                self.next()
            elif t.text == "non" and self.at("-", 1):
                self.pos += 3
            else:
                return

    # -- declarations ---------------------------------------------------
    def compilation_unit(self):
        start = self.peek()
        members = []
        if self.at("package"):
            while not self.accept(";"):
                self.next()
        while self.at("import"):
            while not self.accept(";"):
                self.next()
        while self.peek() is not _EOF:
            if self.accept(";"):
                continue
            members.extend(self.member())
        return self.node(T.CompilationUnit, members, start)

    def is_type_decl_start(self):
        return (self.at("class") or self.at("interface") or self.at("enum")
                or (self.at("@") and self.at("interface", 1))
                or (self.peek().text == "record" and self.peek(1).kind == "identifier"
                    and self.at("(", 2)))

    def class_decl(self):
        start = self.peek()
        is_enum = self.at("enum")
        if self.at("@"):
            self.next()
        self.next()  # class / interface / enum / record
        name = self.ident()
        children = [self.leaf(name)]
        while not self.at("{"):
            self.next()  # type params, extends, implements, record header
        children.extend(self.class_body(is_enum))
        return self.node(T.ClassDecl, children, start)

    def class_body(self, is_enum=False):
        self.expect("{")
        members = []
        if is_enum:
            depth = 0
            while True:
                t = self.peek()
                if depth == 0 and (self.at(";") or self.at("}")):
                    self.accept(";")
                    break
                if t.text in ("(", "{"):
                    depth += 1
                elif t.text in (")", "}"):
                    depth -= 1
                self.next()
        while not self.at("}"):
            if self.peek() is _EOF:
                raise ParseError("unterminated class body")
            if self.accept(";"):
                continue
            members.extend(self.member())
        self.expect("}")
        return members

    def member(self):
        save = self.pos
        try:
            return self._member()
        except ParseError:
            self.pos = save
            return [self.unknown()]

    def _member(self):
        start = self.peek()
        self.skip_annotations_and_modifiers()
        if self.at("{"):
            return [self.block()]
        if self.is_type_decl_start():
            return [self.class_decl()]
        if self.at("<"):
            self.skip_type_args()
        if self.peek().kind == "identifier" and self.at("(", 1):
            name = self.ident()
            return [self.method_rest(start, None, name)]
        type_node = self.type_()
        name = self.ident()
        if self.at("("):
            return [self.method_rest(start, type_node, name)]
        declarators = self.declarators(name)
        self.end_statement()
        return [self.node(T.FieldDecl, [type_node, *declarators], start)]

    def method_rest(self, start, type_node, name):
        children = [type_node, self.leaf(name)] if type_node is not None else [self.leaf(name)]
        self.expect("(")
        while not self.at(")"):
            children.append(self.parameter())
            if not self.accept(","):
                break
        self.expect(")")
        while self.at("["):  # legacy int f()[]
            self.expect("[")
            self.expect("]")
        if self.accept("throws"):
            self.type_()
            while self.accept(","):
                self.type_()
        if self.at("{"):
            children.append(self.block())
        else:
            if self.accept("default"):
                self.expression()
            self.expect(";")
        return self.node(T.MethodDeclaration, children, start)

    def parameter(self):
        start = self.peek()
        self.skip_annotations_and_modifiers()
        type_node = self.type_()
        self.accept("...")
        name = self.ident()
        while self.at("["):
            self.expect("[")
            self.expect("]")
        return self.node(T.Parameter, [type_node, self.leaf(name)], start)

    def type_(self):
        start = self.peek()
        self.skip_annotations_and_modifiers()
        t = self.peek()
        if t.kind == "keyword" and t.text == "void":
            self.next()
            node = self.node(T.VoidType, [self.leaf(t)], t)
        elif t.kind == "keyword" and t.text in PRIMITIVE_TYPES:
            self.next()
            node = self.node(T.PrimitiveType, [self.leaf(t)], t)
        elif t.kind == "identifier" or t.text == "var":
            leaves = [self.leaf(self.next())]
            extra = []
            while True:
                if self.at("<"):
                    inner = self.skip_type_args()
                    extra.append(self.node(T.UnknownStmt, inner, t))
                elif self.at(".") and self.peek(1).kind == "identifier":
                    self.next()
                    leaves.append(self.leaf(self.next()))
                else:
                    break
            node = self.node(T.ClassOrInterfaceType, leaves + extra, t)
        else:
            raise ParseError(f"expected a type at line {t.line}, found {t.text!r}")
        while self.at("[") and self.at("]", 1):
            self.pos += 2
            node = self.node(T.ArrayType, [node], start)
        return node

    def declarators(self, first_name):
        out = [self.declarator(first_name)]
        while self.accept(","):
            out.append(self.declarator(self.ident()))
        return out

    def declarator(self, name):
        children = [self.leaf(name)]
        while self.at("[") and self.at("]", 1):
            self.pos += 2
        if self.accept("="):
            children.append(self.array_initializer() if self.at("{") else self.expression())
        return self.node(T.VariableDeclarator, children, name)

    def array_initializer(self):
        start = self.expect("{")
        items = []
        while not self.at("}"):
            items.append(self.array_initializer() if self.at("{") else self.expression())
            if not self.accept(","):
                break
        self.expect("}")
        return self.node(T.ArrayCreationExpr, items, start)

    # -- statements -----------------------------------------------------
    def block(self):
        start = self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.peek() is _EOF:
                raise ParseError("unterminated block")
            s = self.statement()
            if s is not None:
                stmts.append(s)
        self.expect("}")
        return self.node(T.BlockStmt, stmts, start)

    def statement(self):
        save = self.pos
        try:
            return self._statement()
        except ParseError:
            self.pos = save
            return self.unknown()

    def _statement(self):
        t = self.peek()
        if self.at("{"):
            return self.block()
        if self.accept(";"):
            return None
        if t.kind == "keyword":
            handler = getattr(self, f"stmt_{t.text}", None)
            if handler is not None:
                return handler()
            if t.text in ("final", "abstract", "static") or t.text in ("class", "interface", "enum"):
                save = self.pos
                self.skip_annotations_and_modifiers()
                if self.is_type_decl_start():
                    return self.class_decl()
                self.pos = save
        if self.at("@"):
            save = self.pos
            self.skip_annotations_and_modifiers()
            if self.is_type_decl_start():
                return self.class_decl()
            self.pos = save
        if t.kind == "identifier" and self.at(":", 1):
            raise ParseError("labels are outside the subset")
        if self.looks_like_local_var():
            decl = self.local_var_decl()
            self.end_statement()
            return self.node(T.ExpressionStmt, [decl], t)
        expr = self.expression()
        self.end_statement()
        return self.node(T.ExpressionStmt, [expr], t)

    def looks_like_local_var(self):
        save = self.pos
        try:
            self.skip_annotations_and_modifiers()
            t = self.peek()
            if t.kind == "keyword" and (t.text in PRIMITIVE_TYPES or t.text == "var"):
                return not self.at(".", 1)
            if t.kind != "identifier":
                return False
            self.type_()
            if self.peek().kind != "identifier":
                return False
            follower = self.peek(1)
            return follower.text in ("=", ";", ",", "[", ":") or follower.line > self.peek().line
        except ParseError:
            return False
        finally:
            self.pos = save

    def local_var_decl(self):
        start = self.peek()
        self.skip_annotations_and_modifiers()
        type_node = self.type_()
        declarators = self.declarators(self.ident())
        return self.node(T.VariableDeclarationExpr, [type_node, *declarators], start)

    def paren_expression(self):
        self.expect("(")
        e = self.expression()
        self.expect(")")
        return e

    def stmt_if(self):
        start = self.expect("if")
        cond = self.paren_expression()
        then = self.statement()
        other = None
        if self.accept("else"):
            other = self.statement()
        return self.node(T.IfStmt, [cond, then, other], start)

    def stmt_while(self):
        start = self.expect("while")
        cond = self.paren_expression()
        body = self.statement()
        return self.node(T.WhileStmt, [cond, body], start)

    def stmt_do(self):
        start = self.expect("do")
        body = self.statement()
        self.expect("while")
        cond = self.paren_expression()
        self.end_statement()
        return self.node(T.DoStmt, [body, cond], start)

    def stmt_for(self):
        start = self.expect("for")
        self.expect("(")
        save = self.pos
        # enhanced for: for (Type name : expr)
        try:
            if self.looks_like_local_var():
                s2 = self.peek()
                self.skip_annotations_and_modifiers()
                type_node = self.type_()
                name = self.ident()
                if self.accept(":"):
                    var = self.node(T.VariableDeclarationExpr,
                                    [type_node, self.node(T.VariableDeclarator, [self.leaf(name)], name)], s2)
                    iterable = self.expression()
                    self.expect(")")
                    body = self.statement()
                    return self.node(T.ForEachStmt, [var, iterable, body], start)
        except ParseError:
            pass
        self.pos = save
        parts = []
        if not self.at(";"):
            if self.looks_like_local_var():
                parts.append(self.local_var_decl())
            else:
                parts.append(self.expression())
                while self.accept(","):
                    parts.append(self.expression())
        self.expect(";")
        if not self.at(";"):
            parts.append(self.expression())
        self.expect(";")
        while not self.at(")"):
            parts.append(self.expression())
            if not self.accept(","):
                break
        self.expect(")")
        parts.append(self.statement())
        return self.node(T.ForStmt, parts, start)

    def stmt_return(self):
        start = self.expect("return")
        value = None
        if not self.at(";") and not self.at("}") and self.peek().line == start.line:
            value = self.expression()
        self.end_statement()
        return self.node(T.ReturnStmt, [value], start)

    def stmt_break(self):
        start = self.next()
        if self.peek().kind == "identifier":
            self.next()
        self.end_statement()
        return self.node(T.BreakStmt if start.text == "break" else T.ContinueStmt, [], start)

    stmt_continue = stmt_break

    def stmt_throw(self):
        start = self.expect("throw")
        value = self.expression()
        self.end_statement()
        return self.node(T.ThrowStmt, [value], start)

    def stmt_try(self):
        start = self.expect("try")
        children = []
        if self.accept("("):
            while not self.at(")"):
                children.append(self.local_var_decl())
                if not self.accept(";"):
                    break
            self.expect(")")
        children.append(self.block())
        while self.at("catch"):
            cstart = self.expect("catch")
            self.expect("(")
            pstart = self.peek()
            self.skip_annotations_and_modifiers()
            types = [self.type_()]
            while self.accept("|"):
                types.append(self.type_())
            name = self.ident()
            self.expect(")")
            param = self.node(T.Parameter, [*types, self.leaf(name)], pstart)
            children.append(self.node(T.CatchClause, [param, self.block()], cstart))
        if self.accept("finally"):
            children.append(self.block())
        if len(children) < 2:
            raise ParseError("try without catch/finally")
        return self.node(T.TryStmt, children, start)

    def unknown(self):
        """Consume one unsupported statement/member; its identifiers and literals become leaves."""
        start = self.peek()
        leaves = []
        depth = 0
        consumed = 0
        while self.peek() is not _EOF:
            t = self.peek()
            if t.kind == "punct" and t.text in ("(", "[", "{"):
                depth += 1
            elif t.kind == "punct" and t.text in (")", "]", "}"):
                if depth == 0:
                    if consumed == 0:
                        self.next()  # stray closer: drop it so parsing advances
                    break
                depth -= 1
                if t.text == "}" and depth == 0:
                    self.next()
                    break
            elif t.kind == "punct" and t.text == ";" and depth == 0:
                self.next()
                break
            if t.kind in ("identifier", "literal"):
                leaves.append(self.leaf(t))
            self.next()
            consumed += 1
        return self.node(T.UnknownStmt, leaves, start)

    # -- expressions ----------------------------------------------------
    def expression(self):
        start = self.peek()
        lhs = self.ternary()
        t = self.peek()
        if t.kind == "operator" and t.text in ASSIGN_OPS:
            self.next()
            rhs = self.array_initializer() if self.at("{") else self.expression()
            return self.node(T.AssignExpr, [lhs, rhs], start, op=t.text)
        if t.kind == "operator" and t.text in ("->", "::"):
            raise ParseError("lambdas and method references are outside the subset")
        return lhs

    def ternary(self):
        start = self.peek()
        cond = self.binary(1)
        if self.accept("?"):
            a = self.ternary()
            self.expect(":")
            b = self.ternary()
            return self.node(T.ConditionalExpr, [cond, a, b], start)
        return cond

    def binary(self, min_prec):
        start = self.peek()
        left = self.unary()
        while True:
            t = self.peek()
            prec = BINARY_PRECEDENCE.get(t.text) if t.kind in ("operator", "keyword") else None
            if prec is None or prec < min_prec:
                return left
            self.next()
            if t.text == "instanceof":
                self.accept("final")
                right = self.type_()
                if self.peek().kind == "identifier":  # pattern binding
                    right.append(self.leaf(self.next()))
                left = self.node(T.InstanceOfExpr, [left, right], start)
            else:
                right = self.binary(prec + 1)
                left = self.node(T.BinaryExpr, [left, right], start, op=t.text)

    def unary(self):
        t = self.peek()
        if t.kind == "operator" and t.text in ("+", "-", "!", "~", "++", "--"):
            self.next()
            operand = self.unary()
            return self.node(T.UnaryExpr, [operand], t, op=t.text)
        if self.at("("):
            cast = self.try_cast()
            if cast is not None:
                return cast
        return self.postfix(self.primary())

    def try_cast(self):
        save = self.pos
        start = self.next()
        try:
            inner = self.peek()
            type_node = self.type_()
            self.expect(")")
        except ParseError:
            self.pos = save
            return None
        nxt = self.peek()
        primitive = inner.kind == "keyword" and inner.text in PRIMITIVE_TYPES
        starts_operand = (nxt.kind in ("identifier", "literal")
                          or (nxt.kind == "keyword" and nxt.text in ("this", "super", "new", "true", "false", "null"))
                          or self.at("(") or self.at("!") or self.at("~"))
        if primitive and (starts_operand or self.at("-") or self.at("+")):
            return self.node(T.CastExpr, [type_node, self.unary()], start)
        if not primitive and starts_operand:
            return self.node(T.CastExpr, [type_node, self.unary()], start)
        self.pos = save
        return None

    def arguments(self):
        start = self.expect("(")
        args = []
        while not self.at(")"):
            args.append(self.expression())
            if not self.accept(","):
                break
        self.expect(")")
        return self.node(T.ArgumentList, args, start)

    def primary(self):
        t = self.peek()
        if t.kind == "literal":
            self.next()
            return self.node(T.LiteralExpr, [self.leaf(t)], t)
        if t.kind == "keyword":
            if t.text in ("true", "false", "null"):
                self.next()
                return self.node(T.LiteralExpr, [self.leaf(t)], t)
            if t.text in ("this", "super"):
                self.next()
                if self.at("("):
                    return self.node(T.MethodCallExpr, [self.leaf(t), self.arguments()], t)
                return self.node(T.NameExpr, [self.leaf(t)], t)
            if t.text == "new":
                return self.creation()
            if t.text in PRIMITIVE_TYPES or t.text == "void":
                type_node = self.type_()
                if self.at(".") and self.at("class", 1):
                    self.pos += 2
                    return self.node(T.FieldAccess, [type_node, self.leaf(self.toks[self.pos - 1])], t)
                raise ParseError("primitive type in expression position")
        if t.kind == "identifier" or (t.kind == "keyword" and t.text == "var"):
            self.next()
            if self.at("("):
                return self.node(T.MethodCallExpr, [self.leaf(t), self.arguments()], t)
            return self.node(T.NameExpr, [self.leaf(t)], t)
        if self.at("("):
            self.next()
            inner = self.expression()
            self.expect(")")
            return self.node(T.EnclosedExpr, [inner], t)
        raise ParseError(f"unexpected {t.text!r} at line {t.line}")

    def postfix(self, expr):
        while True:
            t = self.peek()
            if self.at("."):
                self.next()
                if self.at("<"):
                    raise ParseError("explicit generic invocation is outside the subset")
                name = self.peek()
                if name.kind == "identifier" or (name.kind == "keyword" and name.text in ("class", "this", "super", "new")):
                    if name.text == "new":
                        raise ParseError("qualified creation is outside the subset")
                    self.next()
                else:
                    raise ParseError(f"expected member name at line {name.line}")
                if self.at("("):
                    expr = self.node(T.MethodCallExpr, [expr, self.leaf(name), self.arguments()], t)
                else:
                    expr = self.node(T.FieldAccess, [expr, self.leaf(name)], t)
            elif self.at("["):
                self.next()
                index = self.expression()
                self.expect("]")
                expr = self.node(T.ArrayAccessExpr, [expr, index], t)
            elif t.kind == "operator" and t.text in ("++", "--"):
                self.next()
                expr = self.node(T.UnaryExpr, [expr], t, op="post" + t.text)
            else:
                return expr

    def creation(self):
        start = self.expect("new")
        t = self.peek()
        if t.kind == "keyword" and t.text in PRIMITIVE_TYPES:
            self.next()
            type_node = self.node(T.PrimitiveType, [self.leaf(t)], t)
        else:
            leaves = [self.leaf(self.ident())]
            extra = []
            while True:
                if self.at("<"):
                    extra.append(self.node(T.UnknownStmt, self.skip_type_args(), t))
                elif self.at(".") and self.peek(1).kind == "identifier":
                    self.next()
                    leaves.append(self.leaf(self.next()))
                else:
                    break
            type_node = self.node(T.ClassOrInterfaceType, leaves + extra, t)
        if self.at("["):
            dims = []
            while self.accept("["):
                if not self.at("]"):
                    dims.append(self.expression())
                self.expect("]")
            init = self.array_initializer() if self.at("{") else None
            return self.node(T.ArrayCreationExpr, [type_node, *dims, init], start)
        args = self.arguments()
        children = [type_node, args]
        if self.at("{"):
            body_start = self.peek()
            members = self.class_body()
            children.append(self.node(T.ClassDecl, members, body_start))
        return self.node(T.ObjectCreationExpr, children, start)
