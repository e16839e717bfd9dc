"""Analysis query and settings types, shared by the model and the SMC engine."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .dsl.ast import Expr
from .errors import InvalidRange


@dataclass(frozen=True)
class Property:
    """One estimated quantity; ``expr is None`` marks the STEPS counter."""

    expr: Expr | None
    text: str
    delta: float | None = None

    @property
    def is_steps(self) -> bool:
        return self.expr is None


@dataclass(frozen=True)
class FromToBy:
    start: int
    stop: int
    by: int
    properties: tuple[Property, ...]

    def __post_init__(self) -> None:
        if self.start < 0 or self.by < 1 or self.start > self.stop:
            raise InvalidRange(f"invalid range from {self.start} to {self.stop} by {self.by}")
        if not self.properties:
            raise InvalidRange("empty property list")
        if any(p.is_steps for p in self.properties):
            raise InvalidRange("'steps' is only meaningful in when-queries")

    @property
    def steps(self) -> list[int]:
        return list(range(self.start, self.stop + 1, self.by))


@dataclass(frozen=True)
class When:
    condition: Expr
    properties: tuple[Property, ...]

    def __post_init__(self) -> None:
        if not self.properties:
            raise InvalidRange("empty property list")


Query = Union[FromToBy, When]


@dataclass(frozen=True)
class AnalysisSettings:
    default_delta: float = 0.1
    alpha: float = 0.1
    parallelism: int = 1
    batch_size: int = 20
    min_sims: int = 40
    max_sims: int = 200_000
    when_step_cap: int = 10_000

    def __post_init__(self) -> None:
        if self.default_delta <= 0:
            raise InvalidRange("delta must be positive")
        if not 0 < self.alpha < 1:
            raise InvalidRange("alpha must lie in (0, 1)")
        if self.parallelism < 1 or self.batch_size < 1 or self.when_step_cap < 1:
            raise InvalidRange("parallelism, batch size and step cap must be positive")
        if self.min_sims < 2 or self.max_sims < self.min_sims:
            raise InvalidRange("need 2 <= min_sims <= max_sims")
