"""Validated risk model: nodes, actions, variables, attackers, behaviors,
constraints and node properties.

:func:`validate` turns a parsed :class:`~adrisk.dsl.ast.SyntaxTree` into a
:class:`RiskModel` or raises a located :class:`~adrisk.errors.ModelError`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path

from .dsl import ast, parse_text
from .dsl.printer import format_expr
from .errors import (
    CyclicDiagram,
    DuplicateNode,
    MissingBlock,
    MultipleRefinements,
    RateOutOfRange,
    RoleMismatch,
    SourceSpan,
    UndeclaredReference,
)
from .query import AnalysisSettings, FromToBy, Property, Query, When

ALL = "ALL"


class NodeKind(Enum):
    ATTACK = "attack"
    DEFENSE = "defense"
    COUNTERMEASURE = "countermeasure"

    @property
    def offensive(self) -> bool:
        return self is NodeKind.ATTACK


@dataclass(frozen=True)
class NodeDecl:
    id: str
    kind: NodeKind
    detects: tuple[str, ...] = ()


@dataclass(frozen=True)
class Refinement:
    parent: str
    op: str  # OR, AND, OAND, K
    children: tuple[str, ...]
    k: int | None = None

    @property
    def label(self) -> str:
        return f"K{self.k}" if self.op == "K" else self.op


@dataclass(frozen=True)
class RoleChange:
    node: str
    opponents: tuple[str, ...]


@dataclass(frozen=True)
class Action:
    kind: str  # "user", "succ", "fail", "remove"
    name: str
    node: str | None = None

    def __str__(self) -> str:
        return self.name if self.node is None else f"{self.name}({self.node})"


@dataclass(frozen=True)
class BehaviorTransition:
    source: str
    action: Action
    rate: Fraction
    updates: tuple[tuple[str, ast.Expr], ...]
    guard: ast.Expr | None
    target: str
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class AttackerBehavior:
    attacker: str
    states: tuple[str, ...]
    transitions: tuple[BehaviorTransition, ...]

    @property
    def initial_state(self) -> str:
        return self.states[0]


@dataclass
class NodeProperties:
    attributes: dict[str, dict[str, Fraction]] = field(default_factory=dict)
    detection_rates: dict[str, Fraction] = field(default_factory=dict)
    effectiveness: dict[tuple[str, str, str], Fraction] = field(default_factory=dict)

    def attribute(self, name: str, node: str) -> Fraction:
        return self.attributes.get(name, {}).get(node, Fraction(0))

    def detection_rate(self, node: str) -> Fraction:
        return self.detection_rates.get(node, Fraction(0))

    def effectiveness_of(self, defender: str, attacker: str, attack: str) -> Fraction:
        """A specific-attacker entry shadows the ``ALL`` wildcard."""
        key = (defender, attacker, attack)
        if key in self.effectiveness:
            return self.effectiveness[key]
        return self.effectiveness.get((defender, ALL, attack), Fraction(0))


@dataclass(frozen=True)
class SimulateSpec:
    seed: int = 0
    steps: int = 1
    file: str | None = None


@dataclass(frozen=True)
class ExportSpec:
    file: str | None
    labels: tuple[tuple[str, ast.Expr], ...] = ()


@dataclass(frozen=True)
class AnalysisSpec:
    query: Query
    settings: AnalysisSettings


@dataclass(eq=False)
class RiskModel:
    """Immutable after :func:`validate`; safe to share across workers."""

    nodes: tuple[NodeDecl, ...]
    user_actions: tuple[str, ...]
    variables: dict[str, Fraction]
    attackers: tuple[str, ...]
    behaviors: tuple[AttackerBehavior, ...]
    refinements: dict[str, Refinement]
    role_changes: dict[str, RoleChange]
    action_constraints: tuple[tuple[Action, ast.Expr], ...]
    quantitative_constraints: tuple[ast.Expr, ...]
    properties: NodeProperties
    init_attacker: str
    init_nodes: tuple[str, ...]
    analysis: AnalysisSpec | None = None
    simulate: SimulateSpec | None = None
    export: ExportSpec | None = None

    def __post_init__(self) -> None:
        self.kind: dict[str, NodeKind] = {n.id: n.kind for n in self.nodes}
        self.attack_nodes = tuple(n.id for n in self.nodes if n.kind is NodeKind.ATTACK)
        self.defense_nodes = tuple(n.id for n in self.nodes if n.kind is NodeKind.DEFENSE)
        self.countermeasures = tuple(n.id for n in self.nodes if n.kind is NodeKind.COUNTERMEASURE)
        self.detects = {n.id: n.detects for n in self.nodes if n.kind is NodeKind.COUNTERMEASURE}
        self.attribute_names = tuple(self.properties.attributes)
        self.variable_names = tuple(self.variables)
        self.var_index = {v: i for i, v in enumerate(self.variable_names)}
        self.attr_index = {a: i for i, a in enumerate(self.attribute_names)}
        self.behavior = next(b for b in self.behaviors if b.attacker == self.init_attacker)
        # nodes n with n -RC-> x, keyed by x
        self.rc_parents: dict[str, tuple[str, ...]] = {}
        for rc in self.role_changes.values():
            for opp in rc.opponents:
                self.rc_parents[opp] = self.rc_parents.get(opp, ()) + (rc.node,)
        # defense nodes refining a countermeasure only act through it
        self.reactive_defenses = frozenset(
            c
            for p, r in self.refinements.items()
            if self.kind[p] is NodeKind.COUNTERMEASURE
            for c in r.children
        )
        self.static_defenses = tuple(
            d for d in self.defense_nodes if d not in self.reactive_defenses
        )
        self.transitions_from: dict[str, tuple[BehaviorTransition, ...]] = {
            s: tuple(t for t in self.behavior.transitions if t.source == s)
            for s in self.behavior.states
        }
        self.constraints_for: dict[Action, tuple[ast.Expr, ...]] = {}
        for a, e in self.action_constraints:
            self.constraints_for[a] = self.constraints_for.get(a, ()) + (e,)

    def __getstate__(self) -> dict:
        # compiled closures do not pickle; workers rebuild them lazily
        state = dict(self.__dict__)
        state.pop("_compiled", None)
        return state

    @property
    def actions(self) -> tuple[Action, ...]:
        """Every action available to behaviors, predefined ones included."""
        out = [Action("user", a) for a in self.user_actions]
        for n in self.attack_nodes:
            out += [Action("succ", "succ", n), Action("fail", "fail", n), Action("remove", "remove", n)]
        return tuple(out)

    @property
    def initial_state(self) -> str:
        return self.behavior.initial_state

    def node_counts(self) -> dict[str, int]:
        return {k.value: sum(1 for n in self.nodes if n.kind is k) for k in NodeKind}

    def refinement_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.refinements.values():
            key = "K" if r.op == "K" else r.op
            counts[key] = counts.get(key, 0) + 1
        return counts


# ---------------------------------------------------------------- validation


class _Validator:
    def __init__(self, tree: ast.SyntaxTree) -> None:
        self.tree = tree
        self.kind: dict[str, NodeKind] = {}
        self.nodes: list[NodeDecl] = []
        self.variables: dict[str, Fraction] = {}
        self.attributes: dict[str, dict[str, Fraction]] = {}

    def items(self, kind: str) -> tuple[ast.Item, ...]:
        b = self.tree.block(kind)
        return b.items if b is not None else ()

    def run(self) -> RiskModel:
        self.declare_nodes()
        refinements, role_changes = self.diagram()
        self.check_acyclic(refinements, role_changes)
        props = self.node_properties()
        user_actions = self.actions()
        self.declare_variables()
        attackers, behaviors = self.behaviors(user_actions)
        action_constraints = self.action_constraints(user_actions)
        quant = tuple(self.resolve(q.condition) for q in self.items("quantitative constraints"))  # type: ignore[union-attr]
        init_attacker, init_nodes = self.init(attackers)
        self.check_effectiveness_attackers(props, attackers)
        return RiskModel(
            nodes=tuple(self.nodes),
            user_actions=user_actions,
            variables=self.variables,
            attackers=attackers,
            behaviors=behaviors,
            refinements=refinements,
            role_changes=role_changes,
            action_constraints=action_constraints,
            quantitative_constraints=quant,
            properties=props,
            init_attacker=init_attacker,
            init_nodes=init_nodes,
            analysis=self.analysis(),
            simulate=self.simulate(),
            export=self.export(),
        )

    # --- nodes and diagram

    def declare_nodes(self) -> None:
        pending: list[tuple[ast.CountermeasureDecl, SourceSpan]] = []
        for block_kind, node_kind in (
            ("attack nodes", NodeKind.ATTACK),
            ("defense nodes", NodeKind.DEFENSE),
            ("countermeasure nodes", NodeKind.COUNTERMEASURE),
        ):
            for item in self.items(block_kind):
                ident = item.name if isinstance(item, ast.CountermeasureDecl) else item
                assert isinstance(ident, ast.Ident)
                if ident.name in self.kind or ident.name == ALL:
                    raise DuplicateNode(f"node '{ident.name}' declared twice", ident.span)
                self.kind[ident.name] = node_kind
                if isinstance(item, ast.CountermeasureDecl):
                    pending.append((item, ident.span))
                    self.nodes.append(NodeDecl(ident.name, node_kind))
                else:
                    self.nodes.append(NodeDecl(ident.name, node_kind))
        for decl, span in pending:
            if not decl.detects:
                raise RoleMismatch(f"countermeasure '{decl.name.name}' detects no attack", span)
            for d in decl.detects:
                self.require_kind(d, (NodeKind.ATTACK,), "countermeasures detect attack nodes")
            idx = next(i for i, n in enumerate(self.nodes) if n.id == decl.name.name)
            self.nodes[idx] = NodeDecl(
                decl.name.name, NodeKind.COUNTERMEASURE, tuple(dict.fromkeys(d.name for d in decl.detects))
            )

    def require_node(self, ident: ast.Ident) -> NodeKind:
        if ident.name not in self.kind:
            raise UndeclaredReference(f"undeclared node '{ident.name}'", ident.span)
        return self.kind[ident.name]

    def require_kind(self, ident: ast.Ident, kinds: tuple[NodeKind, ...], why: str) -> None:
        k = self.require_node(ident)
        if k not in kinds:
            raise RoleMismatch(f"'{ident.name}' is a {k.value} node: {why}", ident.span)

    def diagram(self) -> tuple[dict[str, Refinement], dict[str, RoleChange]]:
        refinements: dict[str, Refinement] = {}
        role_changes: dict[str, RoleChange] = {}
        for edge in self.items("attack diagram"):
            assert isinstance(edge, ast.DiagramEdge)
            pk = self.require_node(edge.parent)
            kids = [self.require_node(c) for c in edge.children]
            names = tuple(c.name for c in edge.children)
            if len(set(names)) != len(names):
                raise RoleMismatch(f"repeated child under '{edge.parent.name}'", edge.parent.span)
            same = [k.offensive == pk.offensive for k in kids]
            if edge.op == "->":
                if all(same):
                    is_refinement = True
                elif not any(same):
                    is_refinement = False
                else:
                    raise RoleMismatch(
                        f"'{edge.parent.name} ->' mixes same-role and opposite-role children",
                        edge.parent.span,
                    )
            else:
                is_refinement = True
                if not all(same):
                    raise RoleMismatch(
                        f"refinement of '{edge.parent.name}' must use children of the same role",
                        edge.parent.span,
                    )

            if not is_refinement:
                if edge.parent.name in role_changes:
                    raise MultipleRefinements(edge.parent.name, edge.parent.span)
                role_changes[edge.parent.name] = RoleChange(edge.parent.name, names)
                continue

            if edge.parent.name in refinements:
                raise MultipleRefinements(edge.parent.name, edge.parent.span)
            if pk is NodeKind.DEFENSE:
                raise RoleMismatch(f"defense node '{edge.parent.name}' cannot be refined", edge.parent.span)
            if pk is NodeKind.COUNTERMEASURE:
                for c in edge.children:
                    self.require_kind(c, (NodeKind.DEFENSE,), "countermeasures refine into defense nodes")
            op = "OR" if edge.op == "->" else edge.op
            if op == "K":
                assert edge.k is not None
                if not 1 <= edge.k <= len(names):
                    raise RoleMismatch(
                        f"K{edge.k} refinement of '{edge.parent.name}' has {len(names)} children",
                        edge.parent.span,
                    )
            refinements[edge.parent.name] = Refinement(edge.parent.name, op, names, edge.k)
        return refinements, role_changes

    def check_acyclic(self, refinements: dict[str, Refinement], role_changes: dict[str, RoleChange]) -> None:
        succ: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for r in refinements.values():
            succ[r.parent].extend(r.children)
        for rc in role_changes.values():
            succ[rc.node].extend(rc.opponents)
        WHITE, GREY, BLACK = 0, 1, 2
        color = {n: WHITE for n in succ}
        for root in succ:
            if color[root] != WHITE:
                continue
            stack: list[tuple[str, int]] = [(root, 0)]
            path: list[str] = [root]
            color[root] = GREY
            while stack:
                node, i = stack[-1]
                if i < len(succ[node]):
                    stack[-1] = (node, i + 1)
                    nxt = succ[node][i]
                    if color[nxt] == GREY:
                        cycle = path[path.index(nxt):] + [nxt]
                        raise CyclicDiagram(cycle)
                    if color[nxt] == WHITE:
                        color[nxt] = GREY
                        stack.append((nxt, 0))
                        path.append(nxt)
                else:
                    color[node] = BLACK
                    stack.pop()
                    path.pop()

    # --- properties

    def probability(self, num: ast.Num, what: str) -> Fraction:
        if not 0 <= num.value <= 1:
            raise RateOutOfRange(f"{what} must lie in [0, 1]", num.span)
        return num.value

    def node_properties(self) -> NodeProperties:
        props = NodeProperties()
        for item in self.items("attributes"):
            assert isinstance(item, ast.AttributeDecl)
            if item.name.name in props.attributes:
                raise DuplicateNode(f"attribute '{item.name.name}' declared twice", item.name.span)
            values: dict[str, Fraction] = {}
            for nv in item.values:
                self.require_node(nv.node)
                values[nv.node.name] = nv.value.value
            props.attributes[item.name.name] = values
        self.attributes = props.attributes
        for item in self.items("attack detection rates"):
            assert isinstance(item, ast.NodeValue)
            self.require_kind(item.node, (NodeKind.ATTACK,), "detection rates apply to attack nodes")
            props.detection_rates[item.node.name] = self.probability(item.value, "detection rate")
        for item in self.items("defense effectiveness"):
            assert isinstance(item, ast.EffectivenessDecl)
            self.require_kind(
                item.defender,
                (NodeKind.DEFENSE, NodeKind.COUNTERMEASURE),
                "effectiveness is declared for defensive nodes",
            )
            self.require_kind(item.attack, (NodeKind.ATTACK,), "effectiveness is against attack nodes")
            key = (item.defender.name, item.attacker.name, item.attack.name)
            props.effectiveness[key] = self.probability(item.value, "defense effectiveness")
        self._eff_spans = {
            (i.defender.name, i.attacker.name, i.attack.name): i.attacker.span
            for i in self.items("defense effectiveness")
            if isinstance(i, ast.EffectivenessDecl)
        }
        return props

    def check_effectiveness_attackers(self, props: NodeProperties, attackers: tuple[str, ...]) -> None:
        for key in props.effectiveness:
            if key[1] != ALL and key[1] not in attackers:
                raise UndeclaredReference(f"undeclared attacker '{key[1]}'", self._eff_spans.get(key))

    # --- actions, variables, behaviors

    def actions(self) -> tuple[str, ...]:
        names: list[str] = []
        for item in self.items("actions"):
            assert isinstance(item, ast.Ident)
            if item.name in names or item.name in ast.PREDEFINED_ACTIONS:
                raise DuplicateNode(f"action '{item.name}' declared twice or predefined", item.span)
            names.append(item.name)
        return tuple(names)

    def declare_variables(self) -> None:
        for item in self.items("variables"):
            assert isinstance(item, ast.VariableDecl)
            name = item.name.name
            if name in self.variables or name in self.kind:
                raise DuplicateNode(f"name '{name}' already declared", item.name.span)
            self.variables[name] = item.value.value

    def action(self, ref: ast.ActionRef, user_actions: tuple[str, ...]) -> Action:
        if ref.arg is not None:
            if ref.name not in ast.PREDEFINED_ACTIONS:
                raise UndeclaredReference(f"unknown action '{ref}'", ref.span)
            node = ast.Ident(ref.arg, ref.span)
            self.require_kind(node, (NodeKind.ATTACK,), f"{ref.name} applies to attack nodes")
            return Action(ref.name, ref.name, ref.arg)
        if ref.name not in user_actions:
            raise UndeclaredReference(f"undeclared action '{ref.name}'", ref.span)
        return Action("user", ref.name)

    def behaviors(self, user_actions: tuple[str, ...]) -> tuple[tuple[str, ...], tuple[AttackerBehavior, ...]]:
        attackers: list[str] = []
        behaviors: list[AttackerBehavior] = []
        for item in self.items("attacker behavior"):
            assert isinstance(item, ast.BehaviorDecl)
            who = item.attacker.name
            if who in attackers:
                raise DuplicateNode(f"attacker '{who}' declared twice", item.attacker.span)
            if who == ALL:
                raise DuplicateNode("'ALL' is reserved", item.attacker.span)
            attackers.append(who)
            states = [s.name for s in item.states]
            if not states:
                raise MissingBlock(f"attacker '{who}' declares no states", item.span)
            seen: set[str] = set()
            for s in item.states:
                if s.name in seen:
                    raise DuplicateNode(f"state '{s.name}' declared twice", s.span)
                seen.add(s.name)
            transitions: list[BehaviorTransition] = []
            for t in item.transitions:
                for end in (t.source, t.target):
                    if end.name not in seen:
                        raise UndeclaredReference(f"undeclared state '{end.name}'", end.span)
                if t.rate.value <= 0:
                    raise RateOutOfRange("transition rates must be positive", t.rate.span)
                action = self.action(t.action, user_actions)
                updates = []
                for u in t.updates:
                    if u.variable.name not in self.variables:
                        raise UndeclaredReference(f"undeclared variable '{u.variable.name}'", u.variable.span)
                    updates.append((u.variable.name, self.resolve(u.expr)))
                guard = None if t.guard is None else self.resolve(t.guard)
                transitions.append(
                    BehaviorTransition(
                        t.source.name, action, t.rate.value, tuple(updates), guard, t.target.name, t.source.span
                    )
                )
            behaviors.append(AttackerBehavior(who, tuple(states), tuple(transitions)))
        return tuple(attackers), tuple(behaviors)

    def action_constraints(self, user_actions: tuple[str, ...]) -> tuple[tuple[Action, ast.Expr], ...]:
        out = []
        for item in self.items("action constraints"):
            assert isinstance(item, ast.ActionConstraintDecl)
            out.append((self.action(item.action, user_actions), self.resolve(item.condition)))
        return tuple(out)

    def init(self, attackers: tuple[str, ...]) -> tuple[str, tuple[str, ...]]:
        items = self.items("init")
        if not attackers or not items:
            raise MissingBlock("missing attacker behavior/init")
        if len(items) > 1:
            raise DuplicateNode("init declares more than one attacker", items[1].attacker.span)  # type: ignore[union-attr]
        decl = items[0]
        assert isinstance(decl, ast.InitDecl)
        if decl.attacker.name not in attackers:
            raise UndeclaredReference(f"attacker '{decl.attacker.name}' has no behavior", decl.attacker.span)
        nodes = []
        for n in decl.nodes:
            self.require_kind(n, (NodeKind.ATTACK,), "init grants attack nodes")
            nodes.append(n.name)
        return decl.attacker.name, tuple(dict.fromkeys(nodes))

    # --- expressions

    def resolve(self, e: ast.Expr) -> ast.Expr:
        """Check every name in ``e``; returns ``e`` unchanged."""
        if isinstance(e, ast.Name):
            if e.id not in self.kind and e.id not in self.variables:
                raise UndeclaredReference(f"unresolved name '{e.id}'", e.span)
        elif isinstance(e, ast.Call):
            if e.func in ("has", "allowed"):
                if e.arg not in self.kind:
                    raise UndeclaredReference(f"undeclared node '{e.arg}'", e.span)
                if e.func == "allowed" and self.kind[e.arg] is not NodeKind.ATTACK:
                    raise RoleMismatch(f"allowed() takes an attack node, got '{e.arg}'", e.span)
            elif e.arg not in self.attributes:
                raise UndeclaredReference(f"undeclared attribute '{e.arg}'", e.span)
        elif isinstance(e, ast.Unary):
            self.resolve(e.operand)
        elif isinstance(e, ast.Binary):
            self.resolve(e.left)
            self.resolve(e.right)
        return e

    # --- analysis blocks

    def analysis(self) -> AnalysisSpec | None:
        block = self.tree.block("analysis")
        if block is None:
            return None
        settings: dict[str, float | int] = {}
        query: Query | None = None
        for item in block.items:
            if isinstance(item, ast.QueryDecl):
                props = []
                for p in item.properties:
                    if p.expr is not None:
                        self.resolve(p.expr)
                    text = "steps" if p.expr is None else format_expr(p.expr)
                    delta = None if p.delta is None else float(p.delta.value)
                    props.append(Property(p.expr, text, delta))
                if item.kind == "range":
                    assert item.start is not None and item.stop is not None and item.by is not None
                    query = FromToBy(item.start, item.stop, item.by, tuple(props))
                else:
                    assert item.condition is not None
                    query = When(self.resolve(item.condition), tuple(props))
            elif isinstance(item, ast.Setting):
                assert isinstance(item.value, ast.Num)
                if item.key == "default delta":
                    settings["default_delta"] = float(item.value.value)
                elif item.key == "alpha":
                    settings["alpha"] = float(item.value.value)
                elif item.key == "parallelism":
                    settings["parallelism"] = int(item.value.value)
        if query is None:
            raise MissingBlock("analysis block without a query", block.span)
        return AnalysisSpec(query, AnalysisSettings(**settings))  # type: ignore[arg-type]

    def simulate(self) -> SimulateSpec | None:
        block = self.tree.block("simulate")
        if block is None:
            return None
        kw: dict[str, object] = {}
        for item in block.items:
            assert isinstance(item, ast.Setting)
            kw[item.key] = item.value if isinstance(item.value, str) else int(item.value.value)
        return SimulateSpec(**kw)  # type: ignore[arg-type]

    def export(self) -> ExportSpec | None:
        block = self.tree.block("exportDTMC")
        if block is None:
            return None
        file = None
        labels = []
        for item in block.items:
            if isinstance(item, ast.Setting):
                file = str(item.value)
            else:
                assert isinstance(item, ast.LabelDecl)
                labels.append((item.name, self.resolve(item.condition)))
        return ExportSpec(file, tuple(labels))


def validate(tree: ast.SyntaxTree) -> RiskModel:
    return _Validator(tree).run()


def load_model(path: str | Path) -> RiskModel:
    p = Path(path)
    return validate(parse_text(p.read_text(encoding="utf-8"), str(p)))


def model_from_text(text: str, filename: str = "<input>") -> RiskModel:
    return validate(parse_text(text, filename))
