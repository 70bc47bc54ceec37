"""Lexer for the supported Java subset.

Token kinds are ``identifier``, ``literal``, ``keyword``, ``operator`` and
``punct``. String literals drop their quotes; everything else keeps its
source spelling.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from ..errors import LexError

log = logging.getLogger(__name__)

KEYWORDS = frozenset("""
abstract assert boolean break byte case catch char class const continue default do
double else enum extends final finally float for goto if implements import instanceof
int interface long native new package private protected public return short static
strictfp super switch synchronized this throw throws transient try void volatile while
true false null var
""".split())

PRIMITIVE_TYPES = frozenset("boolean byte char double float int long short".split())

# longest first so the alternation is greedy
OPERATORS = sorted("""
>>>= <<= >>= >>> ... -> :: ++ -- && || == != <= >= += -= *= /= %= &= |= ^= << >>
= < > ! ~ ? : + - * / & | ^ %
""".split(), key=len, reverse=True)
PUNCT = frozenset("( ) { } [ ] ; , . @ ... ::".split())

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\f\r]+)
  | (?P<nl>\n)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<bcomment_open>/\*.*)
  | (?P<text>\"\"\"[\s\S]*?\"\"\")
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<string_open>"(?:[^"\\\n]|\\.)*)
  | (?P<char>'(?:[^'\\\n]|\\.)+')
  | (?P<number>
        0[xX][0-9a-fA-F_]+[lL]?
      | 0[bB][01_]+[lL]?
      | (?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d+)?[fFdDlL]?
    )
  | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<op>""" + "|".join(re.escape(o) for o in OPERATORS) + r"""|[(){}\[\];,.@])
""", re.VERBOSE | re.DOTALL)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int

    def is_(self, text):
        return self.text == text and self.kind in ("keyword", "operator", "punct")


def tokenize(source, strict=True, first_line=1, stats=None):
    """Lex ``source`` into tokens (comments and whitespace dropped).

    In strict mode an illegal character raises LexError. Otherwise the
    offending character becomes a ``literal`` token and
    ``stats['unlexable']`` is incremented.
    """
    tokens = []
    pos = 0
    line = first_line
    line_start = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            ch = source[pos]
            col = pos - line_start + 1
            if strict:
                raise LexError(line, col, ch)
            if stats is not None:
                stats["unlexable"] = stats.get("unlexable", 0) + 1
            log.warning("unlexable character %r at %d:%d", ch, line, col)
            tokens.append(Token("literal", ch, line, col))
            pos += 1
            continue
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "ident":
            tokens.append(Token("keyword" if text in KEYWORDS else "identifier", text, line, col))
        elif kind in ("string", "string_open"):
            body = text[1:-1] if kind == "string" else text[1:]
            tokens.append(Token("literal", body if body else text, line, col))
        elif kind == "text":
            body = text[3:-3]
            tokens.append(Token("literal", body if body else text, line, col))
        elif kind in ("char", "number"):
            tokens.append(Token("literal", text, line, col))
        elif kind == "op":
            tokens.append(Token("punct" if text in PUNCT else "operator", text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rfind("\n") + 1
        pos = m.end()
    return tokens
