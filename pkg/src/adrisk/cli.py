"""Command-line entry point: ``adrisk <command> MODEL [options]``."""

from __future__ import annotations

import argparse
import os
import re
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

from . import dtmc as dtmc_mod
from .dot import to_dot
from .errors import AdriskError
from .model import RiskModel, SimulateSpec, load_model
from .smc import run_query, simulation_log

STAGES = ("analysis", "simulate", "export", "dot")


@dataclass
class RunPlan:
    model_path: Path
    stages: tuple[str, ...]
    out_dir: Path
    seed: int | None = None
    max_states: int = dtmc_mod.DEFAULT_MAX_STATES
    parallelism: int | None = None
    artifacts: list[Path] = field(default_factory=list)

    @property
    def stem(self) -> str:
        return self.model_path.stem


def _diagnostic(path: str, err: Exception) -> str:
    if isinstance(err, AdriskError):
        if err.span is not None:
            return f"{err.span}: error: {err.message}"
        return f"{path}: error: {err.message}"
    return f"{path}: error: {err}"


def _load(path: str) -> RiskModel | None:
    try:
        return load_model(path)
    except OSError as err:
        print(f"{path}: error: {err.strerror or err}", file=sys.stderr)
    except AdriskError as err:
        print(_diagnostic(path, err), file=sys.stderr)
    return None


def _artifact(plan: RunPlan, requested: str | None, default: str) -> Path:
    # only the file name of a requested path is kept so outputs stay in out_dir
    name = Path(requested).name if requested else default
    plan.out_dir.mkdir(parents=True, exist_ok=True)
    path = plan.out_dir / name
    plan.artifacts.append(path)
    return path


def _seed(plan: RunPlan, model: RiskModel) -> int:
    if plan.seed is not None:
        return plan.seed
    return model.simulate.seed if model.simulate else 0


def stage_analysis(plan: RunPlan, model: RiskModel) -> str:
    if model.analysis is None:
        raise AdriskError("model has no analysis block")
    settings = model.analysis.settings
    if plan.parallelism is not None:
        settings = replace(settings, parallelism=plan.parallelism)
    table = run_query(model, model.analysis.query, settings, seed=_seed(plan, model))
    path = _artifact(plan, None, f"{plan.stem}_results.csv")
    path.write_text(table.to_csv(), encoding="utf-8")
    note = "" if table.converged else " (max simulations reached before convergence)"
    return f"{path} [{table.simulations} simulations]{note}"


def stage_simulate(plan: RunPlan, model: RiskModel) -> str:
    spec = model.simulate or SimulateSpec()
    log = simulation_log(model, _seed(plan, model), spec.steps)
    path = _artifact(plan, spec.file, f"{plan.stem}_sim.log")
    path.write_text(log, encoding="utf-8")
    return str(path)


def stage_export(plan: RunPlan, model: RiskModel) -> str:
    d = dtmc_mod.expand(model, plan.max_states)
    requested = model.export.file if model.export else None
    path = _artifact(plan, requested, f"{plan.stem}.pm")
    name = re.sub(r"\W", "_", path.stem) or "riskmodel"
    if name[0].isdigit():
        name = "m_" + name
    path.write_text(dtmc_mod.export_pm(d, name), encoding="utf-8")
    return f"{path} [{d.num_states} states, {d.num_transitions} transitions]"


def stage_dot(plan: RunPlan, model: RiskModel) -> str:
    path = _artifact(plan, None, f"{plan.stem}.dot")
    path.write_text(to_dot(model), encoding="utf-8")
    return str(path)


_STAGE_FUNCS: dict[str, Callable[[RunPlan, RiskModel], str]] = {
    "analysis": stage_analysis,
    "simulate": stage_simulate,
    "export": stage_export,
    "dot": stage_dot,
}


def execute(plan: RunPlan, model: RiskModel) -> int:
    """Run every stage of ``plan``; a failing stage does not stop later ones."""
    status = 0
    for stage in plan.stages:
        t0 = time.perf_counter()
        try:
            result = _STAGE_FUNCS[stage](plan, model)
        except AdriskError as err:
            print(f"{stage}: failed: {err}", file=sys.stderr)
            status = 1
            continue
        print(f"{stage}: {result} ({time.perf_counter() - t0:.2f}s)")
    return status


def cmd_check(args: argparse.Namespace) -> int:
    model = _load(args.model)
    if model is None:
        return 1
    counts = model.node_counts()
    print(", ".join(f"{k}: {v}" for k, v in counts.items()))
    refs = model.refinement_counts()
    print("refinements: " + (", ".join(f"{k}: {v}" for k, v in refs.items()) or "none"))
    print(f"role changes: {len(model.role_changes)}")
    print(f"attacker: {model.init_attacker} (initial state {model.initial_state})")
    return 0


def _plan(args: argparse.Namespace, stages: tuple[str, ...]) -> RunPlan:
    out = args.out or os.environ.get("RISQ_OUT") or "."
    return RunPlan(
        model_path=Path(args.model),
        stages=stages,
        out_dir=Path(out),
        seed=args.seed,
        max_states=args.max_states,
        parallelism=args.parallelism,
    )


def _staged(fixed: tuple[str, ...] | None) -> Callable[[argparse.Namespace], int]:
    def run(args: argparse.Namespace) -> int:
        model = _load(args.model)
        if model is None:
            return 1
        if fixed is None:
            stages = tuple(
                s
                for s, present in (
                    ("analysis", model.analysis is not None),
                    ("simulate", model.simulate is not None),
                    ("export", model.export is not None),
                    ("dot", args.dot),
                )
                if present
            )
            if not stages:
                print(
                    f"{args.model}: nothing to run (no analysis, simulate or exportDTMC block; pass --dot)",
                    file=sys.stderr,
                )
                return 2
        else:
            stages = fixed + (("dot",) if args.dot and "dot" not in fixed else ())
        return execute(_plan(args, stages), model)

    return run


def _non_negative(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adrisk", description="Attack-defense risk models: check, simulate, analyze, export.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("model", help="model file")
        p.add_argument("--seed", type=_non_negative, help="seed for all stochastic outputs")
        p.add_argument("--out", help="output directory (default: $RISQ_OUT or .)")
        p.add_argument("--max-states", type=_positive, default=dtmc_mod.DEFAULT_MAX_STATES, help="state bound for DTMC export")
        p.add_argument("--parallelism", type=_positive, help="worker processes for analysis")
        p.add_argument("--dot", action="store_true", help="also write the diagram as DOT")

    p = sub.add_parser("check", help="validate a model and print a summary")
    p.add_argument("model")
    p.set_defaults(func=cmd_check)
    for name, stages, text in (
        ("run", None, "run every stage declared in the model"),
        ("dot", ("dot",), "write the attack-defense diagram as DOT"),
        ("export", ("export",), "write the DTMC in .pm format"),
        ("simulate", ("simulate",), "write a simulation log"),
        ("analyze", ("analysis",), "run the analysis query and write CSV"),
    ):
        p = sub.add_parser(name, help=text)
        common(p)
        p.set_defaults(func=_staged(stages))
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
