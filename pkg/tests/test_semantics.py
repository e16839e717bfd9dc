from dataclasses import replace
from fractions import Fraction

import pytest

from adrisk.constraints import Configuration, empty_configuration, initial_configuration
from adrisk.dsl.parser import parse_expression
from adrisk.errors import InconsistentSource, NotAnAttackNode
from adrisk.model import Action, model_from_text
from adrisk.semantics import (
    cm_set,
    de_factor,
    enabled,
    exe,
    merge_transitions,
    out_rate,
    step_distribution,
)


def cfg_of(model, state, nodes=(), exact=True):
    base = empty_configuration(model, state, exact=exact)
    return replace(base, active=frozenset(nodes) | base.active, order=tuple(nodes))


def by_rule(transitions):
    return {(str(t.action), t.rule): t for t in transitions}


# ---------------------------------------------------------------- exe / cm / de


def test_exe_rejects_repeat_activation(bank):
    cfg = cfg_of(bank, "tryGetToVault", ["GetToVault"])
    assert not exe(cfg, Action("succ", "succ", "GetToVault"), None, bank)
    assert not exe(cfg, Action("fail", "fail", "GetToVault"), None, bank)


def test_exe_remove_needs_active(bank):
    cfg = cfg_of(bank, "start")
    assert not exe(cfg, Action("remove", "remove", "GetToVault"), None, bank)
    assert exe(cfg_of(bank, "start", ["GetToVault"]), Action("remove", "remove", "GetToVault"), None, bank)


def test_exe_user_action_and_guard(bank):
    cfg = cfg_of(bank, "start")
    assert exe(cfg, Action("user", "try"), None, bank)
    assert not exe(cfg, Action("user", "try"), parse_expression("has(RobBank)"), bank)


def test_cm_set(bank):
    assert cm_set("BlowUp", cfg_of(bank, "start"), bank) == ("LockDown",)
    assert cm_set("BlowUp", cfg_of(bank, "start", ["LaserCutter"]), bank) == ()
    assert cm_set("BlowUp", cfg_of(bank, "start", ["LockDown"]), bank) == ()
    assert cm_set("GetToVault", cfg_of(bank, "start"), bank) == ()
    with pytest.raises(NotAnAttackNode):
        cm_set("Memo", cfg_of(bank, "start"), bank)


def test_de_factor(bank):
    cfg = cfg_of(bank, "start")
    assert de_factor(cfg, "FindCode2", "Thief", bank, exact=True) == Fraction(1, 2)
    assert de_factor(cfg, "RobBank", "Thief", bank, exact=True) == 1
    locked = cfg_of(bank, "start", ["LockDown"])
    assert de_factor(locked, "RobBank", "Thief", bank, exact=True) == Fraction(7, 10)
    assert de_factor(cfg, "GetToVault", "Thief", bank, exact=True) == 1


def test_de_factor_standalone_defense_after_deactivation(bank):
    # Memo leaves the store when FindCode2 succeeds but still scales that attempt
    cfg = replace(cfg_of(bank, "start", ["FindCode2"]), active=frozenset({"FindCode2"}))
    assert de_factor(cfg, "FindCode2", "Thief", bank, exact=True) == Fraction(1, 2)


# ---------------------------------------------------------------- rules


def test_rob_bank_after_open_vault(bank):
    cfg = cfg_of(bank, "start", ["FindCode1", "FindCode2", "LearnCombo", "GetToVault", "OpenVault"])
    cfg = replace(cfg, active=cfg.active - {"Memo"})
    ts = by_rule(enabled(cfg, bank, exact=True))
    assert set(ts) == {("succ(RobBank)", "AddNoC"), ("fail(RobBank)", "FailNoC")}
    assert ts[("succ(RobBank)", "AddNoC")].rate == 2
    dist = {s.actions: s.probability for s in step_distribution(cfg, bank, exact=True)}
    assert dist == {("succ(RobBank)",): Fraction(2, 3), ("fail(RobBank)",): Fraction(1, 3)}


def test_blow_up_always_detected(bank):
    cfg = cfg_of(bank, "tryBlowUp", ["GetToVault"])
    ts = by_rule(enabled(cfg, bank, exact=True))
    assert set(ts) == {("succ(BlowUp)", "Add"), ("fail(BlowUp)", "Fail")}
    add = ts[("succ(BlowUp)", "Add")]
    assert add.rate == 2
    assert {"BlowUp", "LockDown"} <= add.successor.active
    assert add.successor.order == ("GetToVault", "BlowUp")
    fail = ts[("fail(BlowUp)", "Fail")].successor
    assert "LockDown" in fail.active and "BlowUp" not in fail.active
    # attempt cost accrues for failures too; the countermeasure accrues on the defender side
    assert add.successor.cum_attacker == fail.cum_attacker == (Fraction(90),)
    assert fail.vars == (Fraction(1),)
    assert fail.cum_defender == add.successor.cum_defender


def test_findcode2_scaled_by_memo(bank):
    cfg = cfg_of(bank, "tryFindCombo", ["FindCode1"])
    ts = by_rule(enabled(cfg, bank, exact=True))
    assert ts[("succ(FindCode2)", "AddNoC")].rate == Fraction(1, 2)  # 1 * (1 - 0.5)
    assert ts[("fail(FindCode2)", "FailNoC")].rate == 1


CUTTER = """
begin attack nodes Goal Cut end attack nodes
begin countermeasure nodes Alarm = {Goal} end countermeasure nodes
begin attack diagram Goal -> {Alarm} Alarm -> {Cut} end attack diagram
begin attacker behavior
 begin attack
  attacker = T
  states = s
  transitions = s -(succ(Cut), 1) -> s, s -(fail(Cut), 1) -> s
 end attack
end attacker behavior
begin init T = {} end init
"""


def test_success_disables_countermeasure_failure_does_not():
    m = model_from_text(CUTTER)
    cfg = replace(initial_configuration(m, exact=True), active=frozenset({"Alarm"}))
    ts = by_rule(enabled(cfg, m, exact=True))
    assert ts[("succ(Cut)", "AddNoC")].successor.active == {"Cut"}
    assert ts[("fail(Cut)", "FailNoC")].successor.active == {"Alarm"}


def test_laser_cutter_blocks_lock_down(bank):
    cfg = cfg_of(bank, "tryBlowUp", ["GetToVault", "LaserCutter"])
    ts = by_rule(enabled(cfg, bank, exact=True))
    assert all("LockDown" not in t.successor.active for t in ts.values())
    # dr(BlowUp) = 1 with no countermeasure left: AddNoC has rate 0 and only Add survives
    assert set(ts) == {("succ(BlowUp)", "Add"), ("fail(BlowUp)", "Fail")}


def test_inconsistent_successor_dropped(bank):
    # cost cap of 100 stops a second BlowUp attempt
    cfg = replace(cfg_of(bank, "tryBlowUp", ["GetToVault"]), cum_attacker=(Fraction(20),))
    assert enabled(cfg, bank, exact=True) == []
    assert out_rate(cfg, bank, exact=True) == 0


def test_inconsistent_source(bank):
    cfg = cfg_of(bank, "start", ["RobBank"])
    with pytest.raises(InconsistentSource):
        enabled(cfg, bank)


def test_remove_rule():
    m = model_from_text("""
begin attack nodes A end attack nodes
begin attacker behavior
 begin attack
  attacker = T
  states = s
  transitions = s -(succ(A), 1) -> s, s -(remove(A), 3) -> s
 end attack
end attacker behavior
begin init T = {} end init
""")
    start = initial_configuration(m, exact=True)
    (add,) = enabled(start, m, exact=True)
    (rem,) = enabled(add.successor, m, exact=True)
    assert rem.rule == "Rem" and rem.rate == 3
    assert rem.successor.active == start.active and rem.successor.order == start.order


def test_rate_splitting(bank):
    # Add + AddNoC = r * de for a partially detected attack
    text = """
begin attack nodes A end attack nodes
begin defense nodes D end defense nodes
begin countermeasure nodes C = {A} end countermeasure nodes
begin attack diagram A -> {D} end attack diagram
begin attack detection rates A = 0.25 end attack detection rates
begin defense effectiveness D(ALL, A) = 0.2 end defense effectiveness
begin attacker behavior
 begin attack
  attacker = T
  states = s, t
  transitions = s -(succ(A), 4) -> t, s -(fail(A), 2) -> t
 end attack
end attacker behavior
begin init T = {} end init
"""
    m = model_from_text(text)
    ts = by_rule(enabled(initial_configuration(m, exact=True), m, exact=True))
    de = Fraction(4, 5)
    assert ts[("succ(A)", "Add")].rate + ts[("succ(A)", "AddNoC")].rate == 4 * de
    assert ts[("succ(A)", "Add")].rate == 4 * de * Fraction(1, 4)
    assert ts[("fail(A)", "Fail")].rate + ts[("fail(A)", "FailNoC")].rate == 2 * de
    assert "C" in ts[("fail(A)", "Fail")].successor.active


# ---------------------------------------------------------------- step distribution


def test_deadlock_self_loop(bank):
    cfg = cfg_of(bank, "complete")
    (step,) = step_distribution(cfg, bank, exact=True)
    assert step.successor == cfg and step.probability == 1 and step.is_deadlock_loop


def test_merge_parallel_transitions():
    m = model_from_text("""
begin attack nodes A end attack nodes
begin actions go stay end actions
begin attacker behavior
 begin attack
  attacker = T
  states = s, t
  transitions = s -(go, 0.3) -> t, s -(stay, 0.2) -> t, s -(go, 0.5) -> s
 end attack
end attacker behavior
begin init T = {} end init
""")
    cfg = initial_configuration(m, exact=True)
    groups = merge_transitions(enabled(cfg, m, exact=True))
    assert [len(g) for g in groups.values()] == [2, 1]
    dist = step_distribution(cfg, m, exact=True)
    assert dist[0].probability == Fraction(1, 2) and dist[0].actions == ("go", "stay")
    assert sum(s.probability for s in dist) == 1


def test_float_mode_agrees(bank):
    exact = initial_configuration(bank, exact=True)
    approx = initial_configuration(bank)
    pe = sorted(float(s.probability) for s in step_distribution(exact, bank, exact=True))
    pf = sorted(s.probability for s in step_distribution(approx, bank))
    assert pf == pytest.approx(pe, abs=1e-15)
    assert isinstance(approx, Configuration)
