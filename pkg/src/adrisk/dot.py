"""Graphviz rendering of attack-defense diagrams."""

from __future__ import annotations

from .model import NodeKind, RiskModel

_SHAPES = {
    NodeKind.ATTACK: "box",
    NodeKind.DEFENSE: "ellipse",
    NodeKind.COUNTERMEASURE: "hexagon",
}


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(model: RiskModel) -> str:
    """Deterministic DOT digraph named ``riskmodel``.

    Refinement edges carry the operator (OAND edges also the child position),
    role-change edges are dashed and detection links of countermeasures dotted.
    """
    lines = ["digraph riskmodel {", "  rankdir=TB;"]
    for n in model.nodes:
        lines.append(f"  {_quote(n.id)} [shape={_SHAPES[n.kind]}];")
    for n in model.nodes:
        ref = model.refinements.get(n.id)
        if ref is not None:
            for pos, child in enumerate(ref.children, start=1):
                label = f"OAND {pos}" if ref.op == "OAND" else ref.label
                lines.append(f"  {_quote(n.id)} -> {_quote(child)} [label={_quote(label)}];")
        rc = model.role_changes.get(n.id)
        if rc is not None:
            for opp in rc.opponents:
                lines.append(f"  {_quote(n.id)} -> {_quote(opp)} [style=dashed];")
    for n in model.nodes:
        for target in n.detects:
            lines.append(
                f"  {_quote(n.id)} -> {_quote(target)} [style=dotted, arrowhead=none, label=\"detects\"];"
            )
    lines.append("}")
    return "\n".join(lines) + "\n"
