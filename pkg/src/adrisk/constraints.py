"""Constraint store: configurations, refinement satisfaction, expression
evaluation and the consistency predicate.

Configurations are concrete valuations, so satisfaction is decided by direct
evaluation; there is no solver.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Union

from .dsl import ast
from .dsl.printer import format_expr
from .errors import DivisionByZero, NotAnAttackNode, UnresolvedName
from .model import Action, NodeKind, RiskModel

Number = Union[int, float, Fraction]


@dataclass(frozen=True, slots=True)
class Configuration:
    """A DTMC state: the constraint store plus the attacker's behavior state.

    ``vars``, ``cum_attacker`` and ``cum_defender`` follow the model's
    variable and attribute declaration order. ``order`` lists the active
    attack nodes by activation time.
    """

    state: str
    active: frozenset[str]
    order: tuple[str, ...]
    vars: tuple[Number, ...] = ()
    cum_attacker: tuple[Number, ...] = ()
    cum_defender: tuple[Number, ...] = ()

    def has(self, node: str) -> bool:
        return node in self.active

    def canonical(self) -> tuple:
        return (
            self.state,
            tuple(sorted(self.active)),
            self.order,
            self.vars,
            self.cum_attacker,
            self.cum_defender,
        )


@dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    violations: tuple[tuple[str, str], ...] = field(default=())


def initial_configuration(model: RiskModel, exact: bool = False) -> Configuration:
    """Behavior initial state plus granted init nodes; nothing is accrued."""
    conv = (lambda x: x) if exact else float
    granted = set(model.init_nodes)
    order = tuple(n for n in model.attack_nodes if n in granted)
    zero = Fraction(0) if exact else 0.0
    return Configuration(
        state=model.initial_state,
        active=frozenset(granted) | frozenset(model.static_defenses),
        order=order,
        vars=tuple(conv(v) for v in model.variables.values()),
        cum_attacker=tuple(zero for _ in model.attribute_names),
        cum_defender=tuple(zero for _ in model.attribute_names),
    )


def empty_configuration(model: RiskModel, state: str | None = None, exact: bool = False) -> Configuration:
    """No active nodes, variables at their initial values."""
    base = initial_configuration(model, exact)
    return Configuration(
        state=state or model.initial_state,
        active=frozenset(),
        order=(),
        vars=base.vars,
        cum_attacker=base.cum_attacker,
        cum_defender=base.cum_defender,
    )


# ---------------------------------------------------------------- refinements


def refinement_satisfied(node: str, cfg: Configuration, model: RiskModel) -> bool:
    ref = model.refinements.get(node)
    if ref is None:
        return True
    if model.kind[node] is NodeKind.COUNTERMEASURE:
        # defense children are statically present
        return True
    active = cfg.active
    if ref.op == "OR":
        return any(c in active for c in ref.children)
    if ref.op == "AND":
        return all(c in active for c in ref.children)
    if ref.op == "K":
        assert ref.k is not None
        return sum(1 for c in ref.children if c in active) >= ref.k
    # OAND: all present, activation positions strictly increasing
    if not all(c in active for c in ref.children):
        return False
    pos = {n: i for i, n in enumerate(cfg.order)}
    try:
        seq = [pos[c] for c in ref.children]
    except KeyError:
        return False
    return all(a < b for a, b in zip(seq, seq[1:]))


def allowed(node: str, cfg: Configuration, model: RiskModel) -> bool:
    if model.kind.get(node) is not NodeKind.ATTACK:
        raise NotAnAttackNode(f"'{node}' is not an attack node")
    return refinement_satisfied(node, cfg, model)


# ---------------------------------------------------------------- expressions


def _div(a: Number, b: Number) -> Number:
    if b == 0:
        raise DivisionByZero("division by zero")
    return a / b


_ARITH: dict[str, Callable[[Number, Number], Number]] = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": _div,
}
_COMPARE: dict[str, Callable[[Number, Number], bool]] = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "==": operator.eq,
    "!=": operator.ne,
}


def eval_expr(e: ast.Expr, cfg: Configuration, model: RiskModel, exact: bool = False) -> Number:
    """Reference interpreter. Booleans are encoded as 1/0."""
    if isinstance(e, ast.Num):
        return e.value if exact else float(e.value)
    if isinstance(e, ast.Name):
        if e.id in model.kind:
            return 1 if e.id in cfg.active else 0
        if e.id in model.var_index:
            return cfg.vars[model.var_index[e.id]]
        raise UnresolvedName(f"unresolved name '{e.id}'", e.span)
    if isinstance(e, ast.Call):
        if e.func == "has":
            if e.arg not in model.kind:
                raise UnresolvedName(f"unresolved node '{e.arg}'", e.span)
            return 1 if e.arg in cfg.active else 0
        if e.func == "allowed":
            return 1 if allowed(e.arg, cfg, model) else 0
        if e.arg not in model.attr_index:
            raise UnresolvedName(f"unresolved attribute '{e.arg}'", e.span)
        values = cfg.cum_attacker if e.func == "value" else cfg.cum_defender
        return values[model.attr_index[e.arg]]
    if isinstance(e, ast.Unary):
        return 1 if eval_expr(e.operand, cfg, model, exact) == 0 else 0
    if e.op == "and":
        return 1 if eval_expr(e.left, cfg, model, exact) != 0 and eval_expr(e.right, cfg, model, exact) != 0 else 0
    if e.op == "or":
        return 1 if eval_expr(e.left, cfg, model, exact) != 0 or eval_expr(e.right, cfg, model, exact) != 0 else 0
    a = eval_expr(e.left, cfg, model, exact)
    b = eval_expr(e.right, cfg, model, exact)
    if e.op in _COMPARE:
        return 1 if _COMPARE[e.op](a, b) else 0
    return _ARITH[e.op](a, b)


Compiled = Callable[[Configuration], Number]


def compile_expr(e: ast.Expr, model: RiskModel, exact: bool = False) -> Compiled:
    """Closure-compiled equivalent of :func:`eval_expr`, cached on the model."""
    cache: dict = model.__dict__.setdefault("_compiled", {})
    key = (id(e), exact)
    hit = cache.get(key)
    if hit is not None and hit[0] is e:
        return hit[1]
    fn = _compile(e, model, exact)
    cache[key] = (e, fn)
    return fn


def _compile(e: ast.Expr, model: RiskModel, exact: bool) -> Compiled:
    if isinstance(e, ast.Num):
        v: Number = e.value if exact else float(e.value)
        return lambda cfg: v
    if isinstance(e, ast.Name):
        name = e.id
        if name in model.kind:
            return lambda cfg: 1 if name in cfg.active else 0
        if name in model.var_index:
            i = model.var_index[name]
            return lambda cfg: cfg.vars[i]
        raise UnresolvedName(f"unresolved name '{name}'", e.span)
    if isinstance(e, ast.Call):
        arg = e.arg
        if e.func == "has":
            if arg not in model.kind:
                raise UnresolvedName(f"unresolved node '{arg}'", e.span)
            return lambda cfg: 1 if arg in cfg.active else 0
        if e.func == "allowed":
            if model.kind.get(arg) is not NodeKind.ATTACK:
                raise NotAnAttackNode(f"'{arg}' is not an attack node")
            return lambda cfg: 1 if refinement_satisfied(arg, cfg, model) else 0
        if arg not in model.attr_index:
            raise UnresolvedName(f"unresolved attribute '{arg}'", e.span)
        j = model.attr_index[arg]
        if e.func == "value":
            return lambda cfg: cfg.cum_attacker[j]
        return lambda cfg: cfg.cum_defender[j]
    if isinstance(e, ast.Unary):
        inner = _compile(e.operand, model, exact)
        return lambda cfg: 1 if inner(cfg) == 0 else 0
    left = _compile(e.left, model, exact)
    right = _compile(e.right, model, exact)
    if e.op == "and":
        return lambda cfg: 1 if left(cfg) != 0 and right(cfg) != 0 else 0
    if e.op == "or":
        return lambda cfg: 1 if left(cfg) != 0 or right(cfg) != 0 else 0
    if e.op in _COMPARE:
        cmp = _COMPARE[e.op]
        return lambda cfg: 1 if cmp(left(cfg), right(cfg)) else 0
    arith = _ARITH[e.op]
    return lambda cfg: arith(left(cfg), right(cfg))


# ---------------------------------------------------------------- constraints


def action_permitted(a: Action, cfg: Configuration, model: RiskModel, exact: bool = False) -> bool:
    for cond in model.constraints_for.get(a, ()):
        if compile_expr(cond, model, exact)(cfg) == 0:
            return False
    return True


def is_consistent(cfg: Configuration, model: RiskModel, exact: bool = False) -> ConsistencyReport:
    violations: list[tuple[str, str]] = []
    for node in sorted(cfg.active):
        ref = model.refinements.get(node)
        if ref is not None and not refinement_satisfied(node, cfg, model):
            violations.append((f"{ref.label} refinement of {node}", node))
    for q in model.quantitative_constraints:
        if compile_expr(q, model, exact)(cfg) == 0:
            violations.append(("quantitative constraint", format_expr(q)))
    return ConsistencyReport(not violations, tuple(violations))


def consistent(cfg: Configuration, model: RiskModel, exact: bool = False) -> bool:
    """Fast boolean form of :func:`is_consistent`."""
    for node in cfg.active:
        if node in model.refinements and not refinement_satisfied(node, cfg, model):
            return False
    for q in model.quantitative_constraints:
        if compile_expr(q, model, exact)(cfg) == 0:
            return False
    return True
