"""Exhaustive DTMC construction, PRISM-style export and transient analysis."""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .constraints import Configuration, compile_expr, initial_configuration
from .dsl import ast
from .errors import AdriskError, StateLimitExceeded, UnknownLabel
from .model import RiskModel
from .semantics import step_distribution

DEFAULT_MAX_STATES = 1_000_000

Row = tuple[tuple[int, Fraction], ...]


@dataclass(frozen=True)
class Dtmc:
    """A finite chain over indexed states; state 0 is initial.

    ``rows[i]`` lists ``(successor, probability)`` pairs. ``rates`` keeps the
    merged outgoing rates per row (used for the exact export) and ``states``
    the configurations; neither takes part in equality.
    """

    rows: tuple[Row, ...]
    labels: dict[str, frozenset[int]] = field(default_factory=dict)
    rates: tuple[Row, ...] | None = field(default=None, compare=False, repr=False)
    states: tuple[Configuration, ...] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        n = len(self.rows)
        for i, row in enumerate(self.rows):
            if not row:
                raise AdriskError(f"state {i} has no outgoing transition")
            for j, p in row:
                if not 0 <= j < n:
                    raise AdriskError(f"state {i}: successor {j} out of range")
                if p < 0 or p > 1:
                    raise AdriskError(f"state {i}: probability {p} outside [0, 1]")
            if abs(float(sum(p for _, p in row)) - 1.0) > 1e-12:
                raise AdriskError(f"state {i}: probabilities do not sum to 1")
        for name, members in self.labels.items():
            if any(not 0 <= s < n for s in members):
                raise AdriskError(f"label {name!r} refers to a missing state")

    @property
    def num_states(self) -> int:
        return len(self.rows)

    @property
    def num_transitions(self) -> int:
        return sum(len(r) for r in self.rows)

    def to_csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        indptr = np.zeros(self.num_states + 1, dtype=np.int64)
        indices = np.empty(self.num_transitions, dtype=np.int64)
        data = np.empty(self.num_transitions, dtype=np.float64)
        p = 0
        for i, row in enumerate(self.rows):
            for j, prob in row:
                indices[p] = j
                data[p] = float(prob)
                p += 1
            indptr[i + 1] = p
        return indptr, indices, data

    def label_mask(self, label: str) -> np.ndarray:
        if label not in self.labels:
            raise UnknownLabel(f"unknown label {label!r}")
        mask = np.zeros(self.num_states, dtype=np.bool_)
        for s in self.labels[label]:
            mask[s] = True
        return mask


def expand(
    model: RiskModel,
    max_states: int = DEFAULT_MAX_STATES,
    labels: dict[str, ast.Expr] | None = None,
) -> Dtmc:
    """Breadth-first closure of the reachable configurations, in exact arithmetic.

    ``labels`` defaults to the model's export labels.
    """
    if max_states < 1:
        raise ValueError("max_states must be positive")
    if labels is None:
        labels = dict(model.export.labels) if model.export else {}
    init = initial_configuration(model, exact=True)
    index: dict[Configuration, int] = {init: 0}
    states: list[Configuration] = [init]
    rows: list[Row] = []
    rates: list[Row] = []
    frontier = deque([init])
    while frontier:
        cfg = frontier.popleft()
        i = index[cfg]
        prob_row = []
        rate_row = []
        for step in step_distribution(cfg, model, exact=True):
            j = index.get(step.successor)
            if j is None:
                if len(states) >= max_states:
                    raise StateLimitExceeded(max_states)
                j = index[step.successor] = len(states)
                states.append(step.successor)
                frontier.append(step.successor)
            prob_row.append((j, Fraction(step.probability)))
            rate_row.append((j, Fraction(step.rate)))
        assert i == len(rows)
        rows.append(tuple(prob_row))
        rates.append(tuple(rate_row))
    label_sets = {}
    for name, expr in labels.items():
        fn = compile_expr(expr, model, exact=True)
        label_sets[name] = frozenset(i for i, c in enumerate(states) if fn(c) != 0)
    return Dtmc(tuple(rows), label_sets, tuple(rates), tuple(states))


# ---------------------------------------------------------------- export


def _row_scale(rates: list[Fraction]) -> int:
    """Smallest 10**k turning every rate into an integer (lcm if none does)."""
    dens = [r.denominator for r in rates]
    for k in range(0, 19):
        scale = 10**k
        if all(scale % d == 0 for d in dens):
            return scale
    return math.lcm(*dens)


def _command_terms(row: Row, rate_row: Row | None, i: int) -> list[tuple[int, int, int]]:
    if rate_row is None or all(r == 0 for _, r in rate_row):
        # no rates available (or deadlock self-loop): print reduced probabilities
        if rate_row is not None and len(row) == 1:
            return [(1, 1, row[0][0])]
        return [(p.numerator, p.denominator, j) for j, p in row]
    scale = _row_scale([r for _, r in rate_row])
    nums = [(int(r * scale), j) for j, r in rate_row]
    den = sum(n for n, _ in nums)
    return [(n, den, j) for n, j in nums]


def export_pm(d: Dtmc, name: str = "riskmodel") -> str:
    """Render ``d`` as a PRISM/Storm ``dtmc`` module with exact rationals."""
    n = d.num_states
    lines = ["dtmc", "", f"module {name}", f"  s : [0..{max(n - 1, 0)}] init 0;", ""]
    for i, row in enumerate(d.rows):
        rate_row = d.rates[i] if d.rates is not None else None
        terms = _command_terms(row, rate_row, i)
        body = " + ".join(f"{num}/{den}:(s'={j})" for num, den, j in terms)
        lines.append(f"  [] s={i} -> {body};")
    lines += ["", "endmodule", ""]
    for label, members in d.labels.items():
        cond = " | ".join(f"s={s}" for s in sorted(members)) if members else "false"
        lines.append(f'label "{label}" = {cond};')
    return "\n".join(lines) + "\n"


_CMD = re.compile(r"^\[\]\s*s=(\d+)\s*->\s*(.+);$")
_TERM = re.compile(r"^(\d+)/(\d+):\(s'=(\d+)\)$")
_LABEL = re.compile(r'^label\s+"([^"]+)"\s*=\s*(.+);$')


def read_pm(text: str) -> Dtmc:
    """Parse the subset of the ``.pm`` language produced by :func:`export_pm`."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "dtmc":
        raise AdriskError("not a dtmc model")
    rows: dict[int, Row] = {}
    labels: dict[str, frozenset[int]] = {}
    for ln in lines[1:]:
        m = _CMD.match(ln)
        if m:
            terms = []
            for part in m.group(2).split("+"):
                t = _TERM.match(part.strip())
                if not t:
                    raise AdriskError(f"cannot read term {part.strip()!r}")
                terms.append((int(t.group(3)), Fraction(int(t.group(1)), int(t.group(2)))))
            rows[int(m.group(1))] = tuple(terms)
            continue
        m = _LABEL.match(ln)
        if m:
            cond = m.group(2).strip()
            members: frozenset[int] = frozenset()
            if cond != "false":
                members = frozenset(int(c.strip()[2:]) for c in cond.split("|"))
            labels[m.group(1)] = members
    if sorted(rows) != list(range(len(rows))):
        raise AdriskError("state commands are not contiguous")
    return Dtmc(tuple(rows[i] for i in range(len(rows))), labels)


# ---------------------------------------------------------------- transient analysis


def transient_curve(d: Dtmc, label: str, steps: int) -> np.ndarray:
    """Probability of being in ``label`` after 0, 1, ..., ``steps`` steps."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    mask = d.label_mask(label)
    indptr, indices, data = d.to_csr()
    start = np.zeros(d.num_states)
    start[0] = 1.0
    out = _kernels.propagate(indptr, indices, data, start, mask, steps)
    return np.clip(out, 0.0, 1.0)


def transient_prob(d: Dtmc, label: str, step: int) -> float:
    return float(transient_curve(d, label, step)[step])


def transient_prob_exact(d: Dtmc, label: str, step: int) -> Fraction:
    """Rational variant of :func:`transient_prob` (slow; for small chains)."""
    if label not in d.labels:
        raise UnknownLabel(f"unknown label {label!r}")
    if step < 0:
        raise ValueError("step must be non-negative")
    v: dict[int, Fraction] = {0: Fraction(1)}
    for _ in range(step):
        w: dict[int, Fraction] = {}
        for i, mass in v.items():
            for j, p in d.rows[i]:
                w[j] = w.get(j, Fraction(0)) + mass * p
        v = w
    return sum((m for i, m in v.items() if i in d.labels[label]), Fraction(0))
