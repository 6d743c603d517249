"""This package provides the allocation policies: the PolicySpec class and policy registry, and the admission,
ordering, placement and expansion steps shared by all policies.

All classes and functions are directly accessible using the package namespace.
"""

from .allocation import (
    SlotOutcome,
    AllocationState,
    place,
    run_slot,
    expand_vms,
    headroom_fits,
    accrue_utility,
    order_requests,
    disconnect_out_of_range,
)
from .policy_spec import POLICY_NAMES, PolicySpec, PolicyScope, HeadroomBase, PolicyFamily, resolve_policy

__all__ = [
    "POLICY_NAMES",
    "AllocationState",
    "HeadroomBase",
    "PolicyFamily",
    "PolicyScope",
    "PolicySpec",
    "SlotOutcome",
    "accrue_utility",
    "disconnect_out_of_range",
    "expand_vms",
    "headroom_fits",
    "order_requests",
    "place",
    "resolve_policy",
    "run_slot",
]
