"""This package provides the domain types, scenario configuration and sampling, and feasibility checks used by all
other library packages.

All classes and functions are directly accessible using the package namespace.
"""

from .domain import UERequest, MesServer, PowerState, Coefficients, VmAllocation, CoefficientMode
from .scenario import (
    Scenario,
    ScenarioConfig,
    CoefficientSettings,
    sample_scenario,
    load_scenario_config,
    write_scenario_config,
)
from .feasibility import feasibility, validate_request, feasibility_vector

__all__ = [
    "CoefficientMode",
    "CoefficientSettings",
    "Coefficients",
    "MesServer",
    "PowerState",
    "Scenario",
    "ScenarioConfig",
    "UERequest",
    "VmAllocation",
    "feasibility",
    "feasibility_vector",
    "load_scenario_config",
    "sample_scenario",
    "validate_request",
    "write_scenario_config",
]
