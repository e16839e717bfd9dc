"""Quantitative risk analysis of attack-defense diagrams with probabilistic attackers."""

from .constraints import Configuration, allowed, eval_expr, initial_configuration, is_consistent
from .dot import to_dot
from .dtmc import Dtmc, expand, export_pm, read_pm, transient_prob
from .model import RiskModel, load_model, model_from_text, validate
from .query import AnalysisSettings, FromToBy, Property, When
from .semantics import enabled, step_distribution
from .smc import EstimateTable, rng_stream, run_query, simulate

__version__ = "0.1.0"

__all__ = [
    "AnalysisSettings",
    "Configuration",
    "Dtmc",
    "EstimateTable",
    "FromToBy",
    "Property",
    "RiskModel",
    "When",
    "allowed",
    "enabled",
    "eval_expr",
    "expand",
    "export_pm",
    "initial_configuration",
    "is_consistent",
    "load_model",
    "model_from_text",
    "read_pm",
    "rng_stream",
    "run_query",
    "simulate",
    "step_distribution",
    "to_dot",
    "transient_prob",
    "validate",
]
