"""Rated transition semantics and its normalization into a DTMC step.

Rules: Act (user actions), Add/AddNoC (``succ``), Fail/FailNoC (``fail``)
and Rem (``remove``). Every rule requires the successor store to be
consistent; rules yielding an inconsistent store or a zero rate emit nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .constraints import (
    Configuration,
    Number,
    action_permitted,
    compile_expr,
    consistent,
)
from .dsl import ast
from .errors import InconsistentSource, NotAnAttackNode
from .model import Action, BehaviorTransition, NodeKind, RiskModel


@dataclass(frozen=True)
class RatedTransition:
    rate: Number
    action: Action
    rule: str
    successor: Configuration
    origin: BehaviorTransition | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Step:
    """One entry of a normalized step distribution.

    ``rate`` is the merged rate of every transition reaching ``successor``
    (0 for the implicit deadlock self-loop).
    """

    successor: Configuration
    probability: Number
    rate: Number
    actions: tuple[str, ...] = ()
    rules: tuple[str, ...] = ()

    @property
    def is_deadlock_loop(self) -> bool:
        return not self.actions


def exe(
    cfg: Configuration,
    action: Action,
    guard: ast.Expr | None,
    model: RiskModel,
    exact: bool = False,
) -> bool:
    if guard is not None and compile_expr(guard, model, exact)(cfg) == 0:
        return False
    if not action_permitted(action, cfg, model, exact):
        return False
    if action.kind in ("succ", "fail"):
        return action.node not in cfg.active
    if action.kind == "remove":
        return action.node in cfg.active
    return True


def cm_set(n_a: str, cfg: Configuration, model: RiskModel) -> tuple[str, ...]:
    """Countermeasures triggered by an attempt on ``n_a``, declaration order.

    A countermeasure is left out when already active or when one of its
    role-change children (an attack disabling it) is active.
    """
    if model.kind.get(n_a) is not NodeKind.ATTACK:
        raise NotAnAttackNode(f"'{n_a}' is not an attack node")
    out = []
    for n_c in model.countermeasures:
        if n_a not in model.detects[n_c] or n_c in cfg.active:
            continue
        rc = model.role_changes.get(n_c)
        if rc is not None and any(o in cfg.active for o in rc.opponents):
            continue
        out.append(n_c)
    return tuple(out)


def _defense_effective(n_d: str, cfg: Configuration, model: RiskModel) -> bool:
    # standalone defenses always apply; reactive ones only under an active countermeasure
    if n_d not in model.reactive_defenses:
        return True
    return any(
        p in cfg.active
        for p, r in model.refinements.items()
        if n_d in r.children and model.kind[p] is NodeKind.COUNTERMEASURE
    )


def de_factor(
    cfg_after: Configuration, n_a: str, attacker: str, model: RiskModel, exact: bool = False
) -> Number:
    """Product of ``1 - effectiveness`` over the active opponents of ``n_a``."""
    one: Number = Fraction(1) if exact else 1.0
    conv = (lambda x: x) if exact else float
    rc = model.role_changes.get(n_a)
    if rc is None:
        return one
    props = model.properties
    factor = one
    for opp in rc.opponents:
        kind = model.kind[opp]
        if kind is NodeKind.DEFENSE:
            if _defense_effective(opp, cfg_after, model):
                factor *= one - conv(props.effectiveness_of(opp, attacker, n_a))
        elif kind is NodeKind.COUNTERMEASURE and opp in cfg_after.active:
            factor *= one - conv(props.effectiveness_of(opp, attacker, n_a))
            ref = model.refinements.get(opp)
            if ref is not None:
                for n_d in ref.children:
                    factor *= one - conv(props.effectiveness_of(n_d, attacker, n_a))
    return factor


def _updated_vars(cfg: Configuration, t: BehaviorTransition, model: RiskModel, exact: bool) -> tuple:
    if not t.updates:
        return cfg.vars
    # right-hand sides all read the pre-state
    values = [(model.var_index[v], compile_expr(e, model, exact)(cfg)) for v, e in t.updates]
    out = list(cfg.vars)
    for i, v in values:
        out[i] = v if exact else float(v)
    return tuple(out)


def _accrue(base: tuple, node: str, model: RiskModel, exact: bool) -> tuple:
    if not base:
        return base
    conv = (lambda x: x) if exact else float
    attrs = model.properties.attributes
    return tuple(
        b + conv(attrs[a].get(node, 0)) for b, a in zip(base, model.attribute_names)
    )


def enabled(
    cfg: Configuration, model: RiskModel, exact: bool = False, check_source: bool = True
) -> list[RatedTransition]:
    """The rated multiset of transitions out of ``cfg``, in behavior order."""
    if check_source and not consistent(cfg, model, exact):
        raise InconsistentSource(f"source configuration is inconsistent: {cfg}")
    conv = (lambda x: x) if exact else float
    one: Number = Fraction(1) if exact else 1.0
    attacker = model.init_attacker
    out: list[RatedTransition] = []

    def emit(rate: Number, t: BehaviorTransition, rule: str, succ: Configuration) -> None:
        if rate > 0 and consistent(succ, model, exact):
            out.append(RatedTransition(rate, t.action, rule, succ, t))

    for t in model.transitions_from.get(cfg.state, ()):
        if not exe(cfg, t.action, t.guard, model, exact):
            continue
        r = conv(t.rate)
        new_vars = _updated_vars(cfg, t, model, exact)
        kind = t.action.kind

        if kind == "user":
            emit(r, t, "Act", Configuration(
                t.target, cfg.active, cfg.order, new_vars, cfg.cum_attacker, cfg.cum_defender
            ))
            continue

        n_a = t.action.node
        assert n_a is not None
        if kind == "remove":
            emit(r, t, "Rem", Configuration(
                t.target,
                cfg.active - {n_a},
                tuple(n for n in cfg.order if n != n_a),
                new_vars,
                cfg.cum_attacker,
                cfg.cum_defender,
            ))
            continue

        dr = conv(model.properties.detection_rate(n_a))
        cum_att = _accrue(cfg.cum_attacker, n_a, model, exact)
        if kind == "succ":
            # a successful attack switches off every defensive node it opposes
            disabled = frozenset(model.rc_parents.get(n_a, ()))
            base = (cfg.active | {n_a}) - disabled
            order = cfg.order + (n_a,)
            rules = ("Add", "AddNoC")
        else:
            disabled = frozenset()
            base = cfg.active
            order = cfg.order
            rules = ("Fail", "FailNoC")

        cms = [c for c in cm_set(n_a, cfg, model) if c not in disabled]
        cum_def = cfg.cum_defender
        for c in cms:
            cum_def = _accrue(cum_def, c, model, exact)
        detected = Configuration(t.target, base | frozenset(cms), order, new_vars, cum_att, cum_def)
        missed = Configuration(t.target, base, order, new_vars, cum_att, cfg.cum_defender)
        emit(r * de_factor(detected, n_a, attacker, model, exact) * dr, t, rules[0], detected)
        emit(r * de_factor(missed, n_a, attacker, model, exact) * (one - dr), t, rules[1], missed)
    return out


def merge_transitions(transitions: list[RatedTransition]) -> dict[Configuration, list[RatedTransition]]:
    """Group transitions by successor, first-occurrence order."""
    groups: dict[Configuration, list[RatedTransition]] = {}
    for tr in transitions:
        groups.setdefault(tr.successor, []).append(tr)
    return groups


def step_distribution(cfg: Configuration, model: RiskModel, exact: bool = False) -> list[Step]:
    """Normalize the outgoing rates of ``cfg`` into successor probabilities.

    Configurations without outgoing transitions get a probability-1 self-loop.
    """
    transitions = enabled(cfg, model, exact)
    if not transitions:
        one: Number = Fraction(1) if exact else 1.0
        return [Step(cfg, one, 0 * one)]
    total = sum((tr.rate for tr in transitions), Fraction(0) if exact else 0.0)
    steps = []
    for succ, group in merge_transitions(transitions).items():
        rate = sum((tr.rate for tr in group), Fraction(0) if exact else 0.0)
        steps.append(
            Step(
                succ,
                rate / total,
                rate,
                tuple(dict.fromkeys(str(tr.action) for tr in group)),
                tuple(dict.fromkeys(tr.rule for tr in group)),
            )
        )
    return steps


def out_rate(cfg: Configuration, model: RiskModel, exact: bool = False) -> Number:
    return sum((tr.rate for tr in enabled(cfg, model, exact)), Fraction(0) if exact else 0.0)
