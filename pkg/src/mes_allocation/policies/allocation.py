"""This module contains the AllocationState class that stores the mutable state of a simulation run and the functions
that implement the allocation policies on top of it: admission (headroom) checks, request ordering, placement,
expansion and the per-slot policy step.

All policies share the same skeleton. Servers are tried in increasing order of their energy rank and a request is
placed on the first server that passes the headroom check. Over-provisioning and greedy policies allocate maximum
demands; expand policies allocate minimum demands and, after all arrivals of the slot are placed, grow the most
profitable machines toward their maxima while every server keeps its expansion floor free.

Notes:
    Expand policies admit and allocate on minimum demands. Machines only reach their maximum demands through
    expansion.
"""

from dataclasses import field, dataclass
from collections.abc import Iterator, Sequence

import numpy as np
from ataraxis_base_utilities import console

from .policy_spec import PolicySpec, PolicyFamily, HeadroomBase
from ..energy.energy_model import energy_rank, rank_servers
from ..model.domain import UERequest, MesServer, PowerState, Coefficients, VmAllocation
from ..model.feasibility import feasibility_vector
from ..utility.utility_functions import (
    optimal_server,
    utility_bounds,
    compute_utility,
    utility_matrix,
    penalized_utility,
)


@dataclass
class SlotOutcome:
    """Stores the outcome of a single policy step."""

    slot: int
    """The index of the processed slot."""
    served: list[int] = field(default_factory=list)
    """The ids of the requests that received a virtual machine, in placement order."""
    denied: list[int] = field(default_factory=list)
    """The ids of the requests that were denied service."""
    placements: list[tuple[int, int]] = field(default_factory=list)
    """The (request id, server id) pairs of all placements, in placement order."""
    disconnected: int = 0
    """The number of live virtual machines released because their UE left the coverage range of the host."""
    utility: float = 0.0
    """The utility accrued by all live virtual machines during the slot."""


class AllocationState:
    """Stores the mutable state of a single simulation run: the server fleet and the virtual machines it hosts.

    Each simulation run owns its state. Concurrent runs have to use distinct state instances built from distinct
    server copies.

    Args:
        servers: The server fleet. The server stored under index k has to have id k.
        coefficients: The utility coefficients used by the run.

    Attributes:
        servers: The server fleet.
        coefficients: The utility coefficients used by the run.
        energy_ranks: The energy rank of every server, indexed by server id.
        server_order: The server ids ordered by increasing energy rank. Servers are always tried in this order.
        _vms: The virtual machines hosted by every server, indexed by server id, in creation order.

    Raises:
        ValueError: If the server ids do not match their positions.
    """

    def __init__(self, servers: Sequence[MesServer], coefficients: Coefficients) -> None:
        for index, server in enumerate(servers):
            if server.id != index:
                message = (
                    f"Unable to initialize the AllocationState. Expected the server stored under index {index} to "
                    f"have id {index}, but its id is {server.id}."
                )
                console.error(message=message, error=ValueError)

        self.servers: list[MesServer] = list(servers)
        self.coefficients: Coefficients = coefficients
        self.energy_ranks: list[float] = [energy_rank(server, coefficients) for server in self.servers]
        self.server_order: list[int] = rank_servers(self.servers, coefficients)
        self._vms: dict[int, list[VmAllocation]] = {server.id: [] for server in self.servers}

    def __repr__(self) -> str:
        """Returns a string representation of the AllocationState instance."""
        return (
            f"AllocationState(servers={len(self.servers)}, active_servers={self.active_server_count}, "
            f"vms={sum(len(vms) for vms in self._vms.values())})"
        )

    @property
    def active_server_count(self) -> int:
        """Returns the number of servers in the ON state."""
        return sum(1 for server in self.servers if server.is_on)

    def hosted_vms(self, server_id: int) -> tuple[VmAllocation, ...]:
        """Returns the virtual machines hosted by the input server, in creation order."""
        return tuple(self._vms[server_id])

    def vms(self) -> Iterator[VmAllocation]:
        """Yields all virtual machines hosted by the fleet, server by server."""
        for server_vms in self._vms.values():
            yield from server_vms

    def attach(self, vm: VmAllocation) -> None:
        """Registers the input virtual machine with its host and removes its allocation from the host's available
        resources.
        """
        server = self.servers[vm.server_id]
        server.c_av -= vm.alloc_c
        server.r_av -= vm.alloc_r
        server.h_av -= vm.alloc_h
        self._vms[server.id].append(vm)

    def detach(self, vm: VmAllocation) -> None:
        """Removes the input virtual machine from its host and returns its allocation to the host's available
        resources.
        """
        server = self.servers[vm.server_id]
        self._vms[server.id].remove(vm)
        server.c_av += vm.alloc_c
        server.r_av += vm.alloc_r
        server.h_av += vm.alloc_h

        # Snaps availability back to the totals when the server empties, which removes accumulated rounding drift
        if not self._vms[server.id]:
            server.c_av = server.c_total
            server.r_av = server.r_total
            server.h_av = server.h_total


def _demands(request: UERequest, spec: PolicySpec) -> tuple[float, float, float]:
    """Returns the (CPU, RAM, disk) demand the input policy admits and places the request with."""
    if spec.allocates_minimum:
        return request.c_min, request.r_min, request.h
    return request.c_max, request.r_max, request.h


def headroom_fits(request: UERequest, server: MesServer, spec: PolicySpec) -> bool:
    """Determines whether the input server admits the input request under the policy's headroom rule.

    The UE has to be within the server's coverage range, and every checked demand has to stay strictly below the
    headroom limit of the matching resource. Comprehensive policies check CPU, RAM and disk; CPU-only policies check
    CPU alone. Over-provisioning and greedy policies check maximum demands, expand policies minimum demands.

    Args:
        request: The evaluated request.
        server: The evaluated server.
        spec: The policy whose headroom rule is applied.

    Returns:
        True if the server admits the request, False otherwise.
    """
    if request.distances[server.id] > server.coverage_range:
        return False

    cpu, ram, disk = _demands(request, spec)
    checks = [(cpu, server.c_av, server.c_total)]
    if not spec.cpu_only:
        checks.append((ram, server.r_av, server.r_total))
        checks.append((disk, server.h_av, server.h_total))

    for demand, available, total in checks:
        if spec.headroom_base is HeadroomBase.AVAILABLE:
            limit = (1.0 - spec.headroom) * available
        else:
            limit = available - spec.headroom * total
        if not demand < limit:
            return False
    return True


def _policy_bounds_max(request: UERequest, server_id: int, state: AllocationState, spec: PolicySpec) -> float:
    """Returns the maximum utility the input server earns from the input request under the policy's utility."""
    distance = request.distances[server_id]
    return utility_bounds(request, distance, state.coefficients, cpu_only=spec.cpu_only).u_max


def _ordering_key(request: UERequest, state: AllocationState, spec: PolicySpec) -> float:
    """Returns the maximum utility the input request offers at its optimal server.

    The optimal server is the feasible server with the highest maximum utility. Requests with no feasible server
    return 0, as they are denied regardless of their position.
    """
    row = utility_matrix([request], state.coefficients, bound="max", cpu_only=spec.cpu_only)[0]
    if spec.cpu_only:
        feasible = np.array(
            [
                request.c_min <= server.c_av and request.distances[server.id] <= server.coverage_range
                for server in state.servers
            ],
            dtype=np.bool_,
        )
    else:
        feasible = feasibility_vector(request, state.servers)

    best = optimal_server(row, feasible)
    return 0.0 if best is None else float(row[best])


def order_requests(requests: Sequence[UERequest], spec: PolicySpec, state: AllocationState) -> list[UERequest]:
    """Orders the requests arriving in a slot for placement.

    Greedy policies serve requests in decreasing order of the maximum utility they offer at their optimal server.
    All other policies serve requests in arrival order. Ties keep the arrival order.

    Args:
        requests: The requests arriving in the slot, in arrival order.
        spec: The policy that places the requests.
        state: The run state at the start of the slot.

    Returns:
        The list of requests in placement order.
    """
    if spec.family is not PolicyFamily.GREEDY_MAX:
        return list(requests)

    keys = [_ordering_key(request, state, spec) for request in requests]
    order = sorted(range(len(requests)), key=lambda position: -keys[position])
    return [requests[position] for position in order]


def place(request: UERequest, state: AllocationState, spec: PolicySpec, slot: int) -> VmAllocation | None:
    """Creates a virtual machine for the input request on the first admitting server.

    Servers are tried in increasing order of their energy rank. An idle server is activated when the request is
    placed on it. If the policy uses the activation penalty, an idle server is only activated when the penalized
    minimum utility of the request is positive; otherwise the request is denied without trying further servers.

    CPU-only policies admit on CPU alone. If the admitting server lacks the RAM or disk the request needs, the
    machine cannot be created and the request is dropped. The CPU admission already woke the server at that point, so
    a dropped request can leave an idle server ON and charge it keep-on energy for the slot.

    Args:
        request: The placed request.
        state: The run state. Modified in place.
        spec: The policy that places the request.
        slot: The index of the current slot. Becomes the machine's start slot.

    Returns:
        The created VmAllocation, or None if the request is denied.
    """
    for server_id in state.server_order:
        server = state.servers[server_id]
        if not headroom_fits(request, server, spec):
            continue

        if not server.is_on:
            if spec.activation_penalty:
                bounds = utility_bounds(
                    request, request.distances[server_id], state.coefficients, cpu_only=spec.cpu_only
                )
                penalized = penalized_utility(
                    bounds.u_min,
                    server_on=False,
                    energy_rank=state.energy_ranks[server_id],
                    gamma5=state.coefficients.gamma5,
                )
                if not penalized > 0:
                    return None
            server.power_state = PowerState.ON

        if spec.cpu_only and (server.r_av < request.r_min or server.h_av < request.h):
            return None

        if spec.allocates_minimum:
            alloc_c, alloc_r = request.c_min, request.r_min
        elif spec.cpu_only:
            alloc_c, alloc_r = request.c_max, min(request.r_max, server.r_av)
        else:
            alloc_c, alloc_r = request.c_max, request.r_max

        vm = VmAllocation(
            request=request,
            server_id=server_id,
            alloc_c=alloc_c,
            alloc_r=alloc_r,
            alloc_h=request.h,
            start_slot=slot,
            end_slot=slot + request.t - 1,
        )
        state.attach(vm)
        return vm

    return None


def expand_vms(server: MesServer, state: AllocationState, spec: PolicySpec) -> list[VmAllocation]:
    """Expands the virtual machines hosted by the input server toward their maximum demands.

    Machines are expanded in decreasing order of their maximum utility. Each machine receives as much of its missing
    CPU (and, for comprehensive policies, RAM) as the server can give without its available resources dropping below
    the expansion floor. Expansion stops once the available CPU is at or below the floor.

    Args:
        server: The server whose machines are expanded.
        state: The run state. Modified in place.
        spec: The policy that expands the machines.

    Returns:
        The list of machines that received additional resources.
    """
    cpu_floor = spec.expansion_floor * server.c_total
    ram_floor = spec.expansion_floor * server.r_total
    candidates = sorted(
        state.hosted_vms(server.id),
        key=lambda vm: -_policy_bounds_max(vm.request, server.id, state, spec),
    )

    expanded: list[VmAllocation] = []
    for vm in candidates:
        if server.c_av <= cpu_floor:
            break

        grown = False
        cpu_missing = vm.request.c_max - vm.alloc_c
        if cpu_missing > 0:
            if cpu_missing < server.c_av - cpu_floor:
                vm.alloc_c = vm.request.c_max
                server.c_av -= cpu_missing
            else:
                vm.alloc_c += server.c_av - cpu_floor
                server.c_av = cpu_floor
            grown = True

        ram_missing = vm.request.r_max - vm.alloc_r
        if not spec.cpu_only and ram_missing > 0 and server.r_av > ram_floor:
            if ram_missing < server.r_av - ram_floor:
                vm.alloc_r = vm.request.r_max
                server.r_av -= ram_missing
            else:
                vm.alloc_r += server.r_av - ram_floor
                server.r_av = ram_floor
            grown = True

        if grown:
            expanded.append(vm)

    return expanded


def disconnect_out_of_range(state: AllocationState) -> int:
    """Releases every live virtual machine whose UE is outside the coverage range of its host.

    Notes:
        UE positions are static during a run and placement always checks the coverage range, so this hook never
        releases a machine in the current simulator. It is the place where UE mobility would take effect.

    Returns:
        The number of released machines.
    """
    disconnected = [vm for vm in state.vms() if vm.distance > state.servers[vm.server_id].coverage_range]
    for vm in disconnected:
        state.detach(vm)
    return len(disconnected)


def accrue_utility(state: AllocationState, slot: int) -> float:
    """Credits every virtual machine live in the input slot with one slot of utility.

    The per-slot rate is the comprehensive utility of the machine's current allocation with a duration of one slot,
    so a machine that keeps a constant allocation over its whole lifetime earns exactly the utility of its request.
    The comprehensive utility is used for all policies, including the CPU-only baselines.

    Returns:
        The utility accrued by all live machines during the slot.
    """
    total = 0.0
    for vm in state.vms():
        if not vm.is_live(slot):
            continue
        rate = compute_utility(vm.alloc_c, vm.alloc_r, vm.alloc_h, 1, vm.distance, state.coefficients)
        vm.accrued_utility += rate
        total += rate
    return total


def run_slot(state: AllocationState, spec: PolicySpec, slot: int, arrivals: Sequence[UERequest]) -> SlotOutcome:
    """Executes one slot of the input policy: orders and places the arriving requests, expands the hosted machines
    (expand policies only), disconnects out-of-range UEs and accrues the slot's utility.

    Expired machines have to be released before calling this function.

    Args:
        state: The run state. Modified in place.
        spec: The executed policy.
        slot: The index of the executed slot.
        arrivals: The requests arriving in the slot, in arrival order.

    Returns:
        The SlotOutcome instance that describes the slot.
    """
    outcome = SlotOutcome(slot=slot)
    for request in order_requests(arrivals, spec, state):
        vm = place(request, state, spec, slot)
        if vm is None:
            outcome.denied.append(request.id)
        else:
            outcome.served.append(request.id)
            outcome.placements.append((request.id, vm.server_id))

    if spec.allocates_minimum:
        for server_id in state.server_order:
            expand_vms(state.servers[server_id], state, spec)

    outcome.disconnected = disconnect_out_of_range(state)
    outcome.utility = accrue_utility(state, slot)
    return outcome
