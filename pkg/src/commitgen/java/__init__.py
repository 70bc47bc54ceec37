"""Lexer, node model and parser for the supported Java subset."""

from .lexer import KEYWORDS, Token, tokenize
from .nodes import GRAMMAR_VERSION, AstNode, NodeType
from .parser import parse_compilation_unit

__all__ = ["GRAMMAR_VERSION", "KEYWORDS", "AstNode", "NodeType", "Token",
           "parse_compilation_unit", "tokenize"]
