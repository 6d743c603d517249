"""This library provides a seedable slot-based simulator of utility-driven resource allocation across mobile edge
servers, together with the utility, energy and allocation policy building blocks it is made of.

The most frequently used entry points are directly accessible using the package namespace. Use 'mes-sim --help' to
see the command line interface.
"""

from .model import ScenarioConfig, sample_scenario
from .policies import PolicySpec, resolve_policy
from .simulator import RunResult, run, compare

__all__ = ["PolicySpec", "RunResult", "ScenarioConfig", "compare", "resolve_policy", "run", "sample_scenario"]
