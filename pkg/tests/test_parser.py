from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adrisk.dsl import ast, format_expr, format_tree, parse, parse_expression, parse_text, tokenize
from adrisk.errors import DslError, DuplicateBlock, RateOutOfRange, UnclosedBlock, UnexpectedToken

from conftest import FIXTURES, fixture_text

DIAGRAM = """begin attack diagram
 RobBank -> {OpenVault, BlowUp}
 OpenVault -OAND-> [LearnCombo, GetToVault]
 BlowUp -> {GetToVault}
 LearnCombo -K2-> {FindCode1, FindCode2, FindCode3}
 RobBank -> {LockDown}
 LockDown -> {LaserCutter}
 FindCode2 -> {Memo}
end attack diagram
"""


def test_diagram_block():
    tree = parse_text(DIAGRAM)
    edges = tree.block("attack diagram").items
    # seven edge declarations; one ordered, one threshold
    assert len(edges) == 7
    assert [e.op for e in edges].count("OAND") == 1
    (k,) = [e for e in edges if e.op == "K"]
    assert k.k == 2 and [c.name for c in k.children] == ["FindCode1", "FindCode2", "FindCode3"]
    oand = edges[1]
    assert [c.name for c in oand.children] == ["LearnCombo", "GetToVault"]


def test_empty_input_has_no_blocks():
    assert parse(tokenize("")).blocks == ()


def test_transition_payload():
    text = """begin attacker behavior
 begin attack
  attacker = Thief
  states = start, complete
  transitions = start -(succ(RobBank), 2, allowed(RobBank)) -> complete
 end attack
end attacker behavior"""
    (beh,) = parse_text(text).block("attacker behavior").items
    (t,) = beh.transitions
    assert t.action == ast.ActionRef("succ", "RobBank")
    assert t.rate.value == 2
    assert t.updates == ()
    assert t.guard == ast.Call("allowed", "RobBank")
    assert (t.source.name, t.target.name) == ("start", "complete")


def test_transition_with_updates_and_guard():
    text = """begin attacker behavior
 begin attack
  attacker = T
  states = a
  transitions = a -(fail(X), 0.5, {V = V + 1, W = 2}, !has(X)) -> a
 end attack
end attacker behavior"""
    (beh,) = parse_text(text).block("attacker behavior").items
    (t,) = beh.transitions
    assert [u.variable.name for u in t.updates] == ["V", "W"]
    assert t.rate.value == Fraction(1, 2)
    assert t.guard == ast.Unary("!", ast.Call("has", "X"))


def test_negative_rate_rejected_at_parse_time():
    text = """begin attacker behavior
 begin attack
  attacker = T
  states = a
  transitions = a -(try, -1) -> a
 end attack
end attacker behavior"""
    with pytest.raises(RateOutOfRange):
        parse_text(text)


def test_negative_attribute_value_allowed():
    tree = parse_text("begin attributes\n Gain = {A = -2.5}\nend attributes")
    (decl,) = tree.block("attributes").items
    assert decl.values[0].value.value == Fraction(-5, 2)


def test_duplicate_block():
    with pytest.raises(DuplicateBlock) as exc:
        parse_text("begin actions a end actions\nbegin actions b end actions")
    assert exc.value.kind == "actions"
    assert exc.value.span.line == 2


def test_unclosed_block():
    with pytest.raises(UnclosedBlock):
        parse_text("begin attack nodes A B")


def test_unknown_block_keyword():
    with pytest.raises(UnexpectedToken):
        parse_text("begin attack plans\nend attack plans")


def test_mismatched_end():
    with pytest.raises(DslError):
        parse_text("begin attack nodes A end defense nodes")


@pytest.mark.parametrize(
    "bad",
    [
        "begin attack diagram A -OAND-> {B} end attack diagram",
        "begin attack diagram A -> B end attack diagram",
        "begin variables x = end variables",
        "begin analysis query = eval from 1 to : {A} end analysis",
    ],
)
def test_errors_carry_span_inside_input(bad):
    with pytest.raises(DslError) as exc:
        parse_text(bad)
    span = exc.value.span
    assert span is not None
    lines = bad.split("\n")
    assert 1 <= span.line <= len(lines)
    assert 1 <= span.column <= len(lines[span.line - 1]) + 1


def test_analysis_block_with_delta_override():
    tree = parse_text(fixture_text("bank_robbery_when"))
    (query, *settings) = tree.block("analysis").items
    assert query.kind == "when"
    steps = query.properties[-1]
    assert steps.expr is None and steps.delta.value == Fraction(1, 2)
    assert {s.key for s in settings} == {"default delta", "alpha", "parallelism"}


def test_export_and_simulate_blocks():
    text = """begin simulate
 seed = 1 steps = 1
 file = "sim.log"
end simulate
begin exportDTMC
 file = "RobBank.pm"
 label with "hasRB" when has(RobBank)
end exportDTMC"""
    tree = parse_text(text)
    sim = {s.key: s.value for s in tree.block("simulate").items}
    assert sim["file"] == "sim.log" and sim["seed"].value == 1
    label = tree.block("exportDTMC").items[1]
    assert label.name == "hasRB" and label.condition == ast.Call("has", "RobBank")


@pytest.mark.parametrize(
    "src,expected",
    [
        ("a or b and c", "a or b and c"),
        ("(a or b) and c", "(a or b) and c"),
        ("!has(X) and Y", "!has(X) and Y"),
        ("1 + 2 * 3 <= 4", "1 + 2 * 3 <= 4"),
        ("(1 + 2) * 3", "(1 + 2) * 3"),
        ("a - (b - c)", "a - (b - c)"),
        ("value(Cost) <= 100", "value(Cost) <= 100"),
        ("!(has(OpenVault) or has(BlowUp))", "!(has(OpenVault) or has(BlowUp))"),
    ],
)
def test_precedence_and_printing(src, expected):
    assert format_expr(parse_expression(src)) == expected


def test_precedence_structure():
    e = parse_expression("a or b and c < 1 + 2 * 3")
    assert e.op == "or"
    assert e.right.op == "and"
    assert e.right.right.op == "<"
    assert e.right.right.right.op == "+"
    assert e.right.right.right.right.op == "*"


@pytest.mark.parametrize("path", sorted(FIXTURES.glob("*.adt")), ids=lambda p: p.stem)
def test_round_trip_fixtures(path):
    tree = parse_text(path.read_text())
    printed = format_tree(tree)
    assert parse_text(printed) == tree
    # printing is a fixed point after one round
    assert format_tree(parse_text(printed)) == printed


# ---- generated expressions

names = st.sampled_from(["A", "B", "Cost", "x1"])
leaves = st.one_of(
    st.builds(ast.Name, names),
    st.builds(lambda v: ast.Num(Fraction(v).limit_denominator(1000)), st.integers(-50, 50) | st.sampled_from([0.5, 1.25])),
    st.builds(ast.Call, st.sampled_from(["has", "allowed", "value"]), st.sampled_from(["A", "B"])),
)
exprs = st.recursive(
    leaves,
    lambda inner: st.one_of(
        st.builds(ast.Unary, st.just("!"), inner),
        st.builds(
            ast.Binary,
            st.sampled_from(["and", "or", "+", "-", "*", "/", "<", "<=", ">", ">=", "==", "!="]),
            inner,
            inner,
        ),
    ),
    max_leaves=12,
)


@settings(max_examples=300, deadline=None)
@given(exprs)
def test_expression_round_trip(e):
    assert parse_expression(format_expr(e)) == e
