"""Tokenizer for the attack-defense modeling language."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from ..errors import IllegalCharacter, SourceSpan, UnterminatedString


class TokenType(Enum):
    IDENT = "identifier"
    NUMBER = "number"
    STRING = "string"

    ARROW = "->"
    OR_ARROW = "-OR->"
    AND_ARROW = "-AND->"
    OAND_ARROW = "-OAND->"
    K_ARROW = "-K<n>->"

    LBRACE = "{"
    RBRACE = "}"
    LBRACKET = "["
    RBRACKET = "]"
    LPAREN = "("
    RPAREN = ")"
    COMMA = ","
    COLON = ":"
    ASSIGN = "="

    EQ = "=="
    NE = "!="
    LE = "<="
    GE = ">="
    LT = "<"
    GT = ">"
    NOT = "!"
    PLUS = "+"
    MINUS = "-"
    STAR = "*"
    SLASH = "/"

    EOF = "end of input"


@dataclass(frozen=True)
class Token:
    type: TokenType
    text: str
    span: SourceSpan = field(compare=False)
    # k of a -K<k>-> arrow
    k: int | None = None

    def __repr__(self) -> str:
        if self.type is TokenType.K_ARROW:
            return f"KArrow({self.k})"
        return f"{self.type.name}({self.text!r})"


_REFINE_ARROW = re.compile(r"-(OAND|AND|OR|K(\d+))->")
_NUMBER = re.compile(r"\d+(?:\.\d+)?(?:[eE][+-]?\d+)?|\.\d+")
_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*")

# longest first
_PUNCT = [
    ("->", TokenType.ARROW),
    ("==", TokenType.EQ),
    ("!=", TokenType.NE),
    ("<=", TokenType.LE),
    (">=", TokenType.GE),
    ("{", TokenType.LBRACE),
    ("}", TokenType.RBRACE),
    ("[", TokenType.LBRACKET),
    ("]", TokenType.RBRACKET),
    ("(", TokenType.LPAREN),
    (")", TokenType.RPAREN),
    (",", TokenType.COMMA),
    (":", TokenType.COLON),
    ("=", TokenType.ASSIGN),
    ("<", TokenType.LT),
    (">", TokenType.GT),
    ("!", TokenType.NOT),
    ("+", TokenType.PLUS),
    ("-", TokenType.MINUS),
    ("*", TokenType.STAR),
    ("/", TokenType.SLASH),
]

_ARROW_TYPES = {
    "OR": TokenType.OR_ARROW,
    "AND": TokenType.AND_ARROW,
    "OAND": TokenType.OAND_ARROW,
}


def tokenize(text: str, filename: str = "<input>") -> list[Token]:
    """Split ``text`` into tokens, dropping whitespace and ``//`` comments.

    The returned list always ends with a single EOF token.
    """
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    n = len(text)

    def span_at(p: int) -> SourceSpan:
        return SourceSpan(filename, line, p - line_start + 1)

    while pos < n:
        ch = text[pos]
        if ch == "\n":
            pos += 1
            line += 1
            line_start = pos
            continue
        if ch in " \t\r\f\v﻿":
            pos += 1
            continue
        if text.startswith("//", pos):
            end = text.find("\n", pos)
            pos = n if end < 0 else end
            continue

        span = span_at(pos)

        if ch == '"':
            end = pos + 1
            while end < n and text[end] != '"' and text[end] != "\n":
                end += 1
            if end >= n or text[end] != '"':
                raise UnterminatedString("unterminated string literal", span)
            tokens.append(Token(TokenType.STRING, text[pos + 1 : end], span))
            pos = end + 1
            continue

        if ch == "-":
            m = _REFINE_ARROW.match(text, pos)
            if m:
                if m.group(2) is not None:
                    tokens.append(Token(TokenType.K_ARROW, m.group(0), span, k=int(m.group(2))))
                else:
                    tokens.append(Token(_ARROW_TYPES[m.group(1)], m.group(0), span))
                pos = m.end()
                continue

        if ch.isdigit() or (ch == "." and pos + 1 < n and text[pos + 1].isdigit()):
            m = _NUMBER.match(text, pos)
            assert m is not None
            tokens.append(Token(TokenType.NUMBER, m.group(0), span))
            pos = m.end()
            continue

        if ch.isascii() and ch.isalpha():
            m = _IDENT.match(text, pos)
            assert m is not None
            tokens.append(Token(TokenType.IDENT, m.group(0), span))
            pos = m.end()
            continue

        for lexeme, ttype in _PUNCT:
            if text.startswith(lexeme, pos):
                tokens.append(Token(ttype, lexeme, span))
                pos += len(lexeme)
                break
        else:
            raise IllegalCharacter(f"illegal character {ch!r}", span)

    tokens.append(Token(TokenType.EOF, "", span_at(pos)))
    return tokens
