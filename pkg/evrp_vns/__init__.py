"""
evrp-vns: Variable Neighborhood Search for the Electric Vehicle Routing Problem.

Builds an initial tour by density clustering, savings construction and a
one-pass charging repair, then improves it by perturbation and randomized
variable neighborhood descent with charging-station reallocation.
"""

__version__ = "0.1.0"

from .construction import ConstructionId
from .core import EvalBudget, ValidationReport, tour_weight, validate
from .errors import EvrpError
from .instance import Instance, load_instance, parse_instance
from .local_search import NeighborhoodSet
from .oracle import exact_solve, gen_fixture
from .vns import RunStats, SearchParams, StopCondition, solve

__all__ = [
    "ConstructionId",
    "EvalBudget",
    "EvrpError",
    "Instance",
    "NeighborhoodSet",
    "RunStats",
    "SearchParams",
    "StopCondition",
    "ValidationReport",
    "exact_solve",
    "gen_fixture",
    "load_instance",
    "parse_instance",
    "solve",
    "tour_weight",
    "validate",
]
