import re

from adrisk.dot import to_dot

from conftest import GOLDEN, fixture_model


def test_bank_robbery_matches_golden(bank):
    assert to_dot(bank) == (GOLDEN / "bank_robbery.dot").read_text(encoding="utf-8")


def test_deterministic(bank):
    assert to_dot(bank) == to_dot(fixture_model("bank_robbery_steps"))


def test_shapes_per_role(bank):
    text = to_dot(bank)
    assert '"Memo" [shape=ellipse];' in text
    assert '"LockDown" [shape=hexagon];' in text
    assert text.count("[shape=box]") == 9


def test_edge_kinds(bank):
    text = to_dot(bank)
    assert len(re.findall(r'label="K2"', text)) == 3
    assert '"OpenVault" -> "LearnCombo" [label="OAND 1"]' in text
    assert '"OpenVault" -> "GetToVault" [label="OAND 2"]' in text
    assert text.count("style=dashed") == 3
    assert text.count("style=dotted") == 1


def test_bgp_detect_links():
    text = to_dot(fixture_model("bgp"))
    assert text.startswith("digraph riskmodel {\n")
    assert text.count('label="detects"') == 3
    assert text.rstrip().endswith("}")
