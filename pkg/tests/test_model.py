from fractions import Fraction

import pytest

from adrisk.errors import (
    CyclicDiagram,
    DuplicateNode,
    MissingBlock,
    MultipleRefinements,
    RateOutOfRange,
    RoleMismatch,
    UndeclaredReference,
)
from adrisk.model import ALL, Action, NodeKind, model_from_text

from conftest import fixture_model

BEHAVIOR = """
begin attacker behavior
 begin attack
  attacker = T
  states = s
  transitions = s -(succ(A), 1) -> s
 end attack
end attacker behavior
begin init
 T = {}
end init
"""


def build(body: str, behavior: str = BEHAVIOR):
    return model_from_text(body + behavior)


def test_bank_robbery_septuple(bank):
    assert bank.node_counts() == {"attack": 9, "defense": 1, "countermeasure": 1}
    oand = bank.refinements["OpenVault"]
    assert oand.op == "OAND" and oand.children == ("LearnCombo", "GetToVault")
    k = bank.refinements["LearnCombo"]
    assert (k.op, k.k, k.label) == ("K", 2, "K2")
    assert bank.init_attacker == "Thief" and bank.init_nodes == ("FindCode1",)
    assert bank.user_actions == ("choose", "tryGTV", "try")
    assert bank.variables == {"AttackAttempts": 0}
    assert bank.attackers == ("Thief",)
    assert bank.detects["LockDown"] == ("BlowUp",)
    assert bank.quantitative_constraints and bank.action_constraints


def test_polymorphic_arrow(bank):
    # same-role children give an OR refinement, opposite-role children a role change
    assert bank.refinements["RobBank"].op == "OR"
    assert bank.refinements["BlowUp"].children == ("GetToVault",)
    assert bank.role_changes["RobBank"].opponents == ("LockDown",)
    assert bank.role_changes["LockDown"].opponents == ("LaserCutter",)
    assert bank.role_changes["FindCode2"].opponents == ("Memo",)


def test_initial_state_is_first_listed(bank):
    assert bank.initial_state == "start"


def test_properties_defaults(bank):
    p = bank.properties
    assert p.detection_rate("BlowUp") == 1
    assert p.detection_rate("GetToVault") == 0
    assert p.attribute("Cost", "BlowUp") == 90
    assert p.attribute("Cost", "GetToVault") == 0
    assert p.effectiveness_of("Memo", "Thief", "FindCode2") == Fraction(1, 2)
    assert p.effectiveness_of("Memo", "Thief", "FindCode3") == 0


def test_specific_attacker_shadows_all():
    m = build(
        "begin attack nodes A end attack nodes\n"
        "begin defense nodes D end defense nodes\n"
        "begin attack diagram A -> {D} end attack diagram\n"
        "begin defense effectiveness D(ALL, A) = 0.2, D(T, A) = 0.9 end defense effectiveness\n"
    )
    assert m.properties.effectiveness_of("D", "T", "A") == Fraction(9, 10)
    assert m.properties.effectiveness_of("D", "Other", "A") == Fraction(1, 5)
    assert (("D", ALL, "A")) in m.properties.effectiveness


def test_bgp_countermeasures():
    m = fixture_model("bgp")
    cms = [n for n in m.nodes if n.kind is NodeKind.COUNTERMEASURE]
    assert [(n.id, n.detects) for n in cms] == [("D12", ("A12",)), ("D1", ("A1",)), ("D2", ("A2",))]
    assert {p: m.refinements[p].children for p in ("D12", "D1", "D2")} == {
        "D12": ("M12",), "D1": ("M1",), "D2": ("M2",),
    }
    assert m.reactive_defenses == frozenset({"M12", "M1", "M2"})


def test_predefined_actions_without_actions_block():
    m = build("begin attack nodes A end attack nodes")
    kinds = {a.kind for a in m.actions}
    assert {"succ", "fail", "remove"} <= kinds
    assert Action("succ", "succ", "A") in m.actions


def test_self_refinement_is_cyclic():
    with pytest.raises(CyclicDiagram):
        build("begin attack nodes X A end attack nodes\nbegin attack diagram X -AND-> {X} end attack diagram")


def test_longer_cycle_reports_nodes():
    with pytest.raises(CyclicDiagram) as exc:
        build(
            "begin attack nodes A B C end attack nodes\n"
            "begin attack diagram A -OR-> {B} B -OR-> {C} C -OR-> {A} end attack diagram"
        )
    assert set(exc.value.nodes) >= {"A", "B", "C"}


def test_undeclared_reference_located():
    with pytest.raises(UndeclaredReference) as exc:
        build("begin attack nodes A end attack nodes\nbegin attack diagram A -> {Ghost} end attack diagram")
    assert exc.value.span.line == 2


def test_duplicate_node():
    with pytest.raises(DuplicateNode):
        build("begin attack nodes A end attack nodes\nbegin defense nodes A end defense nodes")


def test_mixed_roles_rejected():
    with pytest.raises(RoleMismatch):
        build(
            "begin attack nodes A B end attack nodes\nbegin defense nodes D end defense nodes\n"
            "begin attack diagram A -> {B, D} end attack diagram"
        )


def test_defense_cannot_be_refined():
    with pytest.raises(RoleMismatch):
        build(
            "begin attack nodes A end attack nodes\nbegin defense nodes D E end defense nodes\n"
            "begin attack diagram D -AND-> {E} end attack diagram"
        )


def test_countermeasure_detects_attack_only():
    with pytest.raises(RoleMismatch):
        build(
            "begin attack nodes A end attack nodes\nbegin defense nodes D end defense nodes\n"
            "begin countermeasure nodes C = {D} end countermeasure nodes"
        )


def test_second_refinement_rejected():
    with pytest.raises(MultipleRefinements) as exc:
        build(
            "begin attack nodes A B C end attack nodes\n"
            "begin attack diagram A -OR-> {B} A -AND-> {C} end attack diagram"
        )
    assert exc.value.node == "A"


def test_k_bound_checked():
    with pytest.raises(RoleMismatch):
        build("begin attack nodes A B end attack nodes\nbegin attack diagram A -K3-> {B} end attack diagram")


def test_probability_out_of_range():
    with pytest.raises(RateOutOfRange):
        build("begin attack nodes A end attack nodes\nbegin attack detection rates A = 1.5 end attack detection rates")


def test_missing_behavior():
    with pytest.raises(MissingBlock, match="missing attacker behavior/init"):
        model_from_text("")


def test_init_selects_behavior():
    text = """begin attack nodes A end attack nodes
begin attacker behavior
 begin attack
  attacker = P
  states = p
  transitions = p -(fail(A), 1) -> p
 end attack
 begin attack
  attacker = Q
  states = q0, q1
  transitions = q0 -(succ(A), 1) -> q1
 end attack
end attacker behavior
begin init
 Q = {}
end init"""
    m = model_from_text(text)
    assert m.attackers == ("P", "Q")
    assert m.behavior.attacker == "Q" and m.initial_state == "q0"


def test_unresolved_guard_name():
    text = BEHAVIOR.replace("s -(succ(A), 1) -> s", "s -(succ(A), 1, Nope > 1) -> s")
    with pytest.raises(UndeclaredReference):
        build("begin attack nodes A end attack nodes", text)


def test_analysis_blocks(bank):
    m = fixture_model("bank_robbery_steps")
    q = m.analysis.query
    assert (q.start, q.stop, q.by) == (1, 100, 1)
    assert [p.text for p in q.properties][:3] == ["RobBank", "OpenVault", "BlowUp"]
    assert m.analysis.settings.default_delta == 0.1
    assert m.simulate.seed == 1 and m.simulate.file == "sim.log"
    w = fixture_model("bank_robbery_when").analysis.query
    assert w.properties[-1].is_steps and w.properties[-1].delta == 0.5
