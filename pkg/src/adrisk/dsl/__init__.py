from .ast import SyntaxTree
from .lexer import Token, TokenType, tokenize
from .parser import parse, parse_expression, parse_text
from .printer import format_expr, format_tree

__all__ = [
    "SyntaxTree",
    "Token",
    "TokenType",
    "format_expr",
    "format_tree",
    "parse",
    "parse_expression",
    "parse_text",
    "tokenize",
]
