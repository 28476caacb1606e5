"""Project simulation over the engine: agents, tick loop, metrics, coverage."""

from .concept import Coverage, coverage_report, in_degrees, load_concept_map, validate_concept_map
from .runner import ABResult, Metrics, RunResult, ab_compare, run, tragedy_metric
from .scenario import Scenario, load, read, shipped, validate

__all__ = [
    "ABResult",
    "Coverage",
    "Metrics",
    "RunResult",
    "Scenario",
    "ab_compare",
    "coverage_report",
    "in_degrees",
    "load",
    "load_concept_map",
    "read",
    "run",
    "shipped",
    "tragedy_metric",
    "validate",
    "validate_concept_map",
]
