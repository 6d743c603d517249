"""This package provides the utility mathematics used by the allocation policies: the comprehensive utility function,
its bounds, the coefficient derivation, the activation penalty and the optimal server selection.

All methods are directly accessible using the package namespace.
"""

from .utility_functions import (
    UtilityBounds,
    cpu_utility,
    optimal_server,
    utility_bounds,
    compute_utility,
    utility_matrix,
    penalized_utility,
    derive_coefficients,
)

__all__ = [
    "UtilityBounds",
    "compute_utility",
    "cpu_utility",
    "derive_coefficients",
    "optimal_server",
    "penalized_utility",
    "utility_bounds",
    "utility_matrix",
]
