"""Untyped syntax tree produced by the parser.

Every node keeps the span of its first token. Spans are excluded from
equality so that re-parsed pretty-printed trees compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from ..errors import SourceSpan

_NOSPAN = SourceSpan("<builtin>", 1, 1)


def _span() -> SourceSpan:
    return field(default=_NOSPAN, compare=False, repr=False)


# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Num:
    value: Fraction
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Name:
    """A bare identifier: a node indicator or a variable, resolved later."""

    id: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Call:
    """``has(N)``, ``allowed(N)``, ``value(Att)`` or ``defvalue(Att)``."""

    func: str
    arg: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    span: SourceSpan = _span()


Expr = Union[Num, Name, Call, Unary, Binary]

CALL_FUNCS = ("has", "allowed", "value", "defvalue")


# ---------------------------------------------------------------- actions


@dataclass(frozen=True)
class ActionRef:
    """A user action ``a`` or a predefined ``succ(n)``/``fail(n)``/``remove(n)``."""

    name: str
    arg: str | None = None
    span: SourceSpan = _span()

    def __str__(self) -> str:
        return self.name if self.arg is None else f"{self.name}({self.arg})"


PREDEFINED_ACTIONS = ("succ", "fail", "remove")


# ---------------------------------------------------------------- block items


@dataclass(frozen=True)
class Ident:
    name: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class CountermeasureDecl:
    name: Ident
    detects: tuple[Ident, ...]


@dataclass(frozen=True)
class DiagramEdge:
    """``parent op {children}``; op is one of '->', 'OR', 'AND', 'OAND', 'K'."""

    parent: Ident
    op: str
    children: tuple[Ident, ...]
    k: int | None = None


@dataclass(frozen=True)
class NodeValue:
    node: Ident
    value: Num


@dataclass(frozen=True)
class AttributeDecl:
    name: Ident
    values: tuple[NodeValue, ...]


@dataclass(frozen=True)
class EffectivenessDecl:
    defender: Ident
    attacker: Ident
    attack: Ident
    value: Num


@dataclass(frozen=True)
class Update:
    variable: Ident
    expr: Expr


@dataclass(frozen=True)
class TransitionDecl:
    source: Ident
    action: ActionRef
    rate: Num
    updates: tuple[Update, ...]
    guard: Expr | None
    target: Ident


@dataclass(frozen=True)
class BehaviorDecl:
    attacker: Ident
    states: tuple[Ident, ...]
    transitions: tuple[TransitionDecl, ...]
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ActionConstraintDecl:
    action: ActionRef
    condition: Expr


@dataclass(frozen=True)
class VariableDecl:
    name: Ident
    value: Num


@dataclass(frozen=True)
class QuantConstraintDecl:
    condition: Expr


@dataclass(frozen=True)
class InitDecl:
    attacker: Ident
    nodes: tuple[Ident, ...]


@dataclass(frozen=True)
class PropertyDecl:
    """A query property; ``expr`` is None for the ``steps`` marker."""

    expr: Expr | None
    delta: Num | None = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class QueryDecl:
    kind: str  # "range" or "when"
    properties: tuple[PropertyDecl, ...]
    start: int | None = None
    stop: int | None = None
    by: int | None = None
    condition: Expr | None = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Setting:
    """``key = value`` inside analysis/simulate/exportDTMC blocks."""

    key: str
    value: Num | str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class LabelDecl:
    name: str
    condition: Expr
    span: SourceSpan = _span()


Item = Union[
    Ident,
    CountermeasureDecl,
    DiagramEdge,
    AttributeDecl,
    NodeValue,
    EffectivenessDecl,
    BehaviorDecl,
    ActionConstraintDecl,
    VariableDecl,
    QuantConstraintDecl,
    InitDecl,
    QueryDecl,
    Setting,
    LabelDecl,
]


BLOCK_KINDS = (
    "attack nodes",
    "defense nodes",
    "countermeasure nodes",
    "attack diagram",
    "attributes",
    "attack detection rates",
    "defense effectiveness",
    "actions",
    "attacker behavior",
    "action constraints",
    "variables",
    "quantitative constraints",
    "init",
    "analysis",
    "simulate",
    "exportDTMC",
)


@dataclass(frozen=True)
class Block:
    kind: str
    items: tuple[Item, ...]
    span: SourceSpan = _span()


@dataclass(frozen=True)
class SyntaxTree:
    blocks: tuple[Block, ...] = ()

    def block(self, kind: str) -> Block | None:
        for b in self.blocks:
            if b.kind == kind:
                return b
        return None
