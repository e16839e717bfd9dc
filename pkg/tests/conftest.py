from __future__ import annotations

from pathlib import Path

import pytest

from adrisk.model import RiskModel, load_model

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.adt"


def fixture_text(name: str) -> str:
    return fixture_path(name).read_text(encoding="utf-8")


_cache: dict[str, RiskModel] = {}


def fixture_model(name: str) -> RiskModel:
    if name not in _cache:
        _cache[name] = load_model(fixture_path(name))
    return _cache[name]


@pytest.fixture(scope="session")
def bank() -> RiskModel:
    return fixture_model("bank_robbery")


@pytest.fixture(scope="session")
def or3() -> RiskModel:
    return fixture_model("or3")
