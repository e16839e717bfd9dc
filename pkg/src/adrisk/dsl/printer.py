"""Render syntax trees and expressions back to source text."""

from __future__ import annotations

from fractions import Fraction

from . import ast

_PREC = {
    "or": 1,
    "and": 2,
    "<": 3, "<=": 3, ">": 3, ">=": 3, "==": 3, "!=": 3,
    "+": 4, "-": 4,
    "*": 5, "/": 5,
}


def format_number(value: Fraction) -> str:
    """Shortest exact decimal text for a terminating fraction."""
    if value.denominator == 1:
        return str(value.numerator)
    sign = "-" if value < 0 else ""
    v = abs(value)
    den = v.denominator
    k = 0
    while (10 ** k) % den and k < 400:
        k += 1
    if (10 ** k) % den:
        # not a decimal fraction; fall back to a division expression
        return f"{sign}{v.numerator}/{v.denominator}"
    scaled = v.numerator * (10 ** k // den)
    digits = str(scaled).rjust(k + 1, "0")
    text = f"{digits[:-k]}.{digits[-k:]}".rstrip("0").rstrip(".")
    return sign + text


def format_expr(e: ast.Expr, parent_prec: int = 0) -> str:
    if isinstance(e, ast.Num):
        s = format_number(e.value)
        return f"({s})" if e.value < 0 and parent_prec else s
    if isinstance(e, ast.Name):
        return e.id
    if isinstance(e, ast.Call):
        return f"{e.func}({e.arg})"
    if isinstance(e, ast.Unary):
        return "!" + format_expr(e.operand, 6)
    prec = _PREC[e.op]
    # left-associative: a right operand of equal precedence needs parentheses
    text = f"{format_expr(e.left, prec)} {e.op} {format_expr(e.right, prec + 1)}"
    return f"({text})" if prec < parent_prec else text


def _idents(xs: tuple[ast.Ident, ...]) -> str:
    return ", ".join(x.name for x in xs)


def _transition(t: ast.TransitionDecl) -> str:
    parts = [str(t.action), format_number(t.rate.value)]
    if t.updates:
        ups = ", ".join(f"{u.variable.name} = {format_expr(u.expr)}" for u in t.updates)
        parts.append("{" + ups + "}")
    if t.guard is not None:
        parts.append(format_expr(t.guard))
    return f"{t.source.name} -({', '.join(parts)}) -> {t.target.name}"


def _property(p: ast.PropertyDecl) -> str:
    s = "steps" if p.expr is None else format_expr(p.expr)
    if p.delta is not None:
        s += f"[delta = {format_number(p.delta.value)}]"
    return s


def _setting(s: ast.Setting) -> str:
    if isinstance(s.value, str):
        return f'{s.key} = "{s.value}"'
    return f"{s.key} = {format_number(s.value.value)}"


def _item_lines(kind: str, item: ast.Item) -> list[str]:
    if isinstance(item, ast.Ident):
        return [item.name]
    if isinstance(item, ast.CountermeasureDecl):
        return [f"{item.name.name} = {{{_idents(item.detects)}}}"]
    if isinstance(item, ast.DiagramEdge):
        arrow = {"->": "->", "OR": "-OR->", "AND": "-AND->", "OAND": "-OAND->"}.get(item.op)
        if item.op == "K":
            arrow = f"-K{item.k}->"
        kids = f"[{_idents(item.children)}]" if item.op == "OAND" else f"{{{_idents(item.children)}}}"
        return [f"{item.parent.name} {arrow} {kids}"]
    if isinstance(item, ast.AttributeDecl):
        vals = ", ".join(f"{v.node.name} = {format_number(v.value.value)}" for v in item.values)
        return [f"{item.name.name} = {{{vals}}}"]
    if isinstance(item, ast.NodeValue):
        return [f"{item.node.name} = {format_number(item.value.value)}"]
    if isinstance(item, ast.EffectivenessDecl):
        return [
            f"{item.defender.name}({item.attacker.name}, {item.attack.name}) = "
            f"{format_number(item.value.value)}"
        ]
    if isinstance(item, ast.BehaviorDecl):
        lines = ["begin attack", f" attacker = {item.attacker.name}"]
        if item.states:
            lines.append(f" states = {_idents(item.states)}")
        if item.transitions:
            lines.append(" transitions =")
            ts = [f"  {_transition(t)}" for t in item.transitions]
            lines.extend(t + "," for t in ts[:-1])
            lines.append(ts[-1])
        lines.append("end attack")
        return lines
    if isinstance(item, ast.ActionConstraintDecl):
        return [f"do({item.action}) -> {format_expr(item.condition)}"]
    if isinstance(item, ast.VariableDecl):
        return [f"{item.name.name} = {format_number(item.value.value)}"]
    if isinstance(item, ast.QuantConstraintDecl):
        return ["{" + format_expr(item.condition) + "}"]
    if isinstance(item, ast.InitDecl):
        return [f"{item.attacker.name} = {{{_idents(item.nodes)}}}"]
    if isinstance(item, ast.QueryDecl):
        props = ", ".join(_property(p) for p in item.properties)
        if item.kind == "range":
            head = f"query = eval from {item.start} to {item.stop} by {item.by}"
        else:
            assert item.condition is not None
            head = f"query = eval when {{{format_expr(item.condition)}}}"
        return [f"{head} : {{{props}}}"]
    if isinstance(item, ast.Setting):
        return [_setting(item)]
    if isinstance(item, ast.LabelDecl):
        return [f'label with "{item.name}" when {format_expr(item.condition)}']
    raise TypeError(f"unknown item {item!r}")


def format_tree(tree: ast.SyntaxTree) -> str:
    out: list[str] = []
    for block in tree.blocks:
        out.append(f"begin {block.kind}")
        for item in block.items:
            out.extend(" " + line for line in _item_lines(block.kind, item))
        out.append(f"end {block.kind}")
        out.append("")
    return "\n".join(out)
