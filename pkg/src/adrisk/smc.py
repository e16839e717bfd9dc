"""Seeded probabilistic simulation and statistical estimation of queries.

Every simulation draws from its own counter-based stream keyed by
``(seed, simulation index)``, so the set of simulated traces is fixed by the
seed alone. Batches are split across worker processes and reassembled in
index order, which keeps estimates independent of the worker count.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, TextIO, Union

import numpy as np
from scipy import stats

from . import _kernels
from .constraints import Configuration, compile_expr, initial_configuration
from .dsl import ast
from .errors import AdriskError, InvalidRange, UnresolvedProperty
from .model import RiskModel
from .query import AnalysisSettings, FromToBy, Property, Query, When
from .semantics import Step, step_distribution

__all__ = [
    "AnalysisSettings",
    "Estimate",
    "EstimateTable",
    "FromToBy",
    "Property",
    "Query",
    "When",
    "rng_stream",
    "run_query",
    "simulate",
]

CACHE_LIMIT = 200_000


def rng_stream(seed: int, sim_index: int) -> np.random.Generator:
    """Independent Philox stream for one simulation."""
    if seed < 0 or sim_index < 0:
        raise ValueError("seed and simulation index must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, sim_index])))


class _Stepper:
    """Samples successors, memoizing step distributions per configuration."""

    def __init__(self, model: RiskModel, cache_limit: int = CACHE_LIMIT) -> None:
        self.model = model
        self.cache_limit = cache_limit
        self.cache: dict[Configuration, tuple[list[Step], np.ndarray]] = {}

    def distribution(self, cfg: Configuration) -> tuple[list[Step], np.ndarray]:
        hit = self.cache.get(cfg)
        if hit is None:
            steps = step_distribution(cfg, self.model)
            cum = np.cumsum([s.probability for s in steps])
            hit = (steps, cum)
            if len(self.cache) >= self.cache_limit:
                self.cache.clear()
            self.cache[cfg] = hit
        return hit

    def absorbing(self, cfg: Configuration) -> bool:
        steps, _ = self.distribution(cfg)
        return len(steps) == 1 and steps[0].is_deadlock_loop

    def sample(self, cfg: Configuration, rng: np.random.Generator) -> Step:
        steps, cum = self.distribution(cfg)
        if len(steps) == 1:
            rng.random()  # keep one draw per step whatever the branching
            return steps[0]
        i = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        return steps[min(i, len(steps) - 1)]


# ---------------------------------------------------------------- simulation


def _record(k: int, cfg: Configuration, model: RiskModel, step: Step | None) -> dict:
    rec: dict = {"step": k}
    if step is not None:
        rec["actions"] = list(step.actions)
        rec["rules"] = list(step.rules)
        rec["rate"] = float(step.rate)
        rec["probability"] = float(step.probability)
    rec["state"] = cfg.state
    rec["active"] = sorted(cfg.active)
    rec["order"] = list(cfg.order)
    rec["vars"] = {v: float(x) for v, x in zip(model.variable_names, cfg.vars)}
    rec["value"] = {a: float(x) for a, x in zip(model.attribute_names, cfg.cum_attacker)}
    rec["defvalue"] = {a: float(x) for a, x in zip(model.attribute_names, cfg.cum_defender)}
    return rec


def simulate(
    model: RiskModel,
    seed: int,
    steps: int,
    log_sink: TextIO | None = None,
    sim_index: int = 0,
) -> list[Configuration]:
    """One trace of ``steps`` steps; deadlock self-loops count as steps.

    With ``log_sink`` set, one JSON object per line is written: the initial
    configuration (step 0) and then every sampled step.
    """
    if steps < 0:
        raise InvalidRange("steps must be non-negative")
    rng = rng_stream(seed, sim_index)
    stepper = _Stepper(model)
    cfg = initial_configuration(model)
    trace = [cfg]
    if log_sink is not None:
        log_sink.write(json.dumps(_record(0, cfg, model, None), sort_keys=True) + "\n")
    for k in range(1, steps + 1):
        step = stepper.sample(cfg, rng)
        cfg = step.successor
        trace.append(cfg)
        if log_sink is not None:
            log_sink.write(json.dumps(_record(k, cfg, model, step), sort_keys=True) + "\n")
    return trace


def simulation_log(model: RiskModel, seed: int, steps: int) -> str:
    buf = io.StringIO()
    simulate(model, seed, steps, buf)
    return buf.getvalue()


# ---------------------------------------------------------------- estimates


StepKey = Union[int, str]


@dataclass(frozen=True)
class Estimate:
    property: str
    step: StepKey
    mean: float
    ci_halfwidth: float
    n: int
    censored: int
    delta: float

    @property
    def converged(self) -> bool:
        return 2 * self.ci_halfwidth <= self.delta


@dataclass
class EstimateTable:
    """Query results; one :class:`Estimate` per (property, step) cell."""

    entries: list[Estimate]
    simulations: int
    alpha: float
    converged: bool
    extra: dict = field(default_factory=dict)

    def get(self, prop: str, step: StepKey = "when") -> Estimate:
        for e in self.entries:
            if e.property == prop and e.step == step:
                return e
        raise KeyError((prop, step))

    def mean(self, prop: str, step: StepKey = "when") -> float:
        return self.get(prop, step).mean

    def series(self, prop: str) -> list[tuple[int, float]]:
        return [(e.step, e.mean) for e in self.entries if e.property == prop and e.step != "when"]  # type: ignore[misc]

    def to_csv(self) -> str:
        out = ["property,step,mean,ci_halfwidth,n,censored"]
        for e in self.entries:
            prop = e.property
            if any(c in prop for c in ',"\n'):
                prop = '"' + prop.replace('"', '""') + '"'
            out.append(f"{prop},{e.step},{e.mean:.12g},{e.ci_halfwidth:.12g},{e.n},{e.censored}")
        return "\n".join(out) + "\n"


# ---------------------------------------------------------------- per-run evaluation


class _Evaluator:
    """Runs individual simulations for a query and returns their cell values."""

    def __init__(self, model: RiskModel, query: Query, seed: int, step_cap: int) -> None:
        self.model = model
        self.query = query
        self.seed = seed
        self.step_cap = step_cap
        self.stepper = _Stepper(model)
        self.props: list[Callable[[Configuration], float] | None] = [
            None if p.is_steps else compile_expr(p.expr, model) for p in query.properties  # type: ignore[arg-type]
        ]
        self.condition = compile_expr(query.condition, model) if isinstance(query, When) else None

    @property
    def cells(self) -> int:
        if isinstance(self.query, FromToBy):
            return len(self.query.properties) * len(self.query.steps)
        return len(self.query.properties)

    def _values(self, cfg: Configuration, steps_taken: int) -> list[float]:
        return [float(steps_taken) if f is None else float(f(cfg)) for f in self.props]

    def run(self, index: int) -> tuple[np.ndarray, bool]:
        rng = rng_stream(self.seed, index)
        cfg = initial_configuration(self.model)
        if isinstance(self.query, FromToBy):
            steps = self.query.steps
            wanted = set(steps)
            per_step: dict[int, list[float]] = {}
            if 0 in wanted:
                per_step[0] = self._values(cfg, 0)
            k = 0
            while k < self.query.stop:
                if self.stepper.absorbing(cfg):
                    # the chain stays put: every later sample point sees cfg
                    vals = self._values(cfg, k)
                    for s in steps:
                        if s > k:
                            per_step[s] = vals
                    break
                cfg = self.stepper.sample(cfg, rng).successor
                k += 1
                if k in wanted:
                    per_step[k] = self._values(cfg, k)
            # property-major layout: all steps of property 0, then property 1, ...
            grid = np.array([per_step[s] for s in steps], dtype=np.float64)
            return grid.T.reshape(-1), False
        assert self.condition is not None
        k = 0
        censored = False
        while self.condition(cfg) == 0:
            if k >= self.step_cap or self.stepper.absorbing(cfg):
                censored = True
                break
            cfg = self.stepper.sample(cfg, rng).successor
            k += 1
        return np.array(self._values(cfg, k), dtype=np.float64), censored

    def run_range(self, start: int, count: int) -> tuple[np.ndarray, np.ndarray]:
        values = np.empty((count, self.cells))
        censored = np.zeros(count, dtype=np.bool_)
        for r in range(count):
            values[r], censored[r] = self.run(start + r)
        return values, censored


_worker: _Evaluator | None = None


def _init_worker(model: RiskModel, query: Query, seed: int, step_cap: int) -> None:
    global _worker
    _worker = _Evaluator(model, query, seed, step_cap)


def _worker_range(start: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    assert _worker is not None
    return _worker.run_range(start, count)


def _chunks(start: int, count: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, count))
    base, extra = divmod(count, parts)
    out = []
    for p in range(parts):
        size = base + (1 if p < extra else 0)
        out.append((start, size))
        start += size
    return out


def _check_query(model: RiskModel, query: Query) -> None:
    exprs: list[ast.Expr] = [p.expr for p in query.properties if p.expr is not None]
    if isinstance(query, When):
        exprs.append(query.condition)
    for e in exprs:
        try:
            compile_expr(e, model)
        except AdriskError as err:
            raise UnresolvedProperty(f"cannot resolve property: {err.message}", err.span) from err


def run_query(
    model: RiskModel,
    query: Query,
    settings: AnalysisSettings | None = None,
    seed: int = 0,
    progress: Callable[[int], None] | None = None,
) -> EstimateTable:
    """Estimate every property of ``query`` to its (alpha, delta) interval.

    Runs ``min_sims`` simulations, then batches of ``batch_size`` until every
    cell's Student-t interval satisfies ``2h <= delta`` or ``max_sims`` is hit.
    """
    settings = settings or AnalysisSettings()
    if seed < 0:
        raise InvalidRange("seed must be non-negative")
    _check_query(model, query)
    props = query.properties
    if isinstance(query, FromToBy):
        keys: list[tuple[Property, StepKey]] = [(p, s) for p in props for s in query.steps]
    else:
        keys = [(p, "when") for p in props]
    deltas = np.array([p.delta if p.delta is not None else settings.default_delta for p, _ in keys])
    cells = len(keys)

    s1 = np.zeros(cells)
    s2 = np.zeros(cells)
    censored_total = 0
    n = 0
    half = np.full(cells, math.inf)

    pool = None
    local: _Evaluator | None = None
    if settings.parallelism > 1:
        pool = ProcessPoolExecutor(
            max_workers=settings.parallelism,
            initializer=_init_worker,
            initargs=(model, query, seed, settings.when_step_cap),
        )
    else:
        local = _Evaluator(model, query, seed, settings.when_step_cap)

    def run_batch(start: int, count: int) -> tuple[np.ndarray, np.ndarray]:
        if pool is None:
            assert local is not None
            return local.run_range(start, count)
        futures = [pool.submit(_worker_range, a, c) for a, c in _chunks(start, count, settings.parallelism)]
        parts = [f.result() for f in futures]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    try:
        batch = settings.min_sims
        while True:
            batch = min(batch, settings.max_sims - n)
            values, cens = run_batch(n, batch)
            b1, b2 = _kernels.batch_moments(values)
            s1 += b1
            s2 += b2
            censored_total += int(cens.sum())
            n += batch
            if progress is not None:
                progress(n)
            mean = s1 / n
            var = np.maximum(s2 - s1 * mean, 0.0) / (n - 1)
            tq = stats.t.ppf(1 - settings.alpha / 2, n - 1)
            half = tq * np.sqrt(var / n)
            if np.all(2 * half <= deltas + 1e-15) or n >= settings.max_sims:
                break
            batch = settings.batch_size
    finally:
        if pool is not None:
            pool.shutdown()

    mean = s1 / n
    entries = [
        Estimate(
            p.text,
            step,
            float(mean[i]),
            float(half[i]),
            n,
            censored_total if step == "when" else 0,
            float(deltas[i]),
        )
        for i, (p, step) in enumerate(keys)
    ]
    return EstimateTable(entries, n, settings.alpha, bool(all(e.converged for e in entries)))


def query_from_model(model: RiskModel) -> tuple[Query, AnalysisSettings]:
    if model.analysis is None:
        raise AdriskError("model has no analysis block")
    return model.analysis.query, model.analysis.settings


def properties(texts: Iterable[str], delta: float | None = None) -> tuple[Property, ...]:
    """Build properties from expression text; ``"steps"`` is the step counter."""
    from .dsl import parse_expression
    from .dsl.printer import format_expr

    out = []
    for t in texts:
        if t.strip() == "steps":
            out.append(Property(None, "steps", delta))
        else:
            e = parse_expression(t)
            out.append(Property(e, format_expr(e), delta))
    return tuple(out)
