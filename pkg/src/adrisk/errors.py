"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1:
            raise ValueError(f"invalid span {self.line}:{self.column}")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


class AdriskError(Exception):
    """Base class; ``span`` is set when the error has a source location."""

    def __init__(self, message: str, span: SourceSpan | None = None) -> None:
        self.message = message
        self.span = span
        super().__init__(f"{span}: {message}" if span else message)


# front end


class DslError(AdriskError):
    pass


class IllegalCharacter(DslError):
    pass


class UnterminatedString(DslError):
    pass


class UnexpectedToken(DslError):
    def __init__(self, message: str, span: SourceSpan | None = None, expected: str = "") -> None:
        self.expected = expected
        super().__init__(message, span)


class UnclosedBlock(DslError):
    pass


class DuplicateBlock(DslError):
    def __init__(self, kind: str, span: SourceSpan | None = None) -> None:
        self.kind = kind
        super().__init__(f"duplicate block '{kind}'", span)


# validation


class ModelError(AdriskError):
    pass


class UndeclaredReference(ModelError):
    pass


class DuplicateNode(ModelError):
    pass


class RoleMismatch(ModelError):
    pass


class CyclicDiagram(ModelError):
    def __init__(self, nodes: list[str], span: SourceSpan | None = None) -> None:
        self.nodes = list(nodes)
        super().__init__("cyclic attack diagram: " + " -> ".join(nodes), span)


class RateOutOfRange(ModelError):
    pass


class MultipleRefinements(ModelError):
    def __init__(self, node: str, span: SourceSpan | None = None) -> None:
        self.node = node
        super().__init__(f"node '{node}' has more than one refinement or role-change", span)


class MissingBlock(ModelError):
    pass


# evaluation and analysis


class EvaluationError(AdriskError):
    pass


class DivisionByZero(EvaluationError):
    pass


class UnresolvedName(EvaluationError):
    pass


class NotAnAttackNode(EvaluationError):
    pass


class InconsistentSource(AdriskError):
    pass


class StateLimitExceeded(AdriskError):
    def __init__(self, max_states: int) -> None:
        self.max_states = max_states
        super().__init__(f"reachable state space exceeds max-states bound {max_states}")


class UnknownLabel(AdriskError):
    pass


class UnresolvedProperty(AdriskError):
    pass


class InvalidRange(AdriskError):
    pass
