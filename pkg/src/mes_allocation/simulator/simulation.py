"""This module contains the run() function that simulates a single allocation policy over a sampled scenario, the
compare() function that runs several policies over the same scenario, and the SlotRecord and RunResult classes that
store the simulation metrics.

Every slot is processed in a fixed order: expired virtual machines are released, the servers' utilization is
recorded, the policy places the slot's arrivals (and expands hosted machines), live machines accrue utility, ON servers
accrue keep-on energy plus usage energy at the recorded utilization and, finally, servers that host no machine live in
the next slot are brought to the IDLE state.
"""

from dataclasses import field, replace, dataclass
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from ataraxis_base_utilities import console

from ..model.domain import PowerState, VmAllocation
from ..model.scenario import Scenario
from ..energy.energy_model import EnergyLedger
from ..policies.allocation import AllocationState, run_slot
from ..policies.policy_spec import PolicySpec
from ..utility.utility_functions import derive_coefficients

Observer = Callable[[int, AllocationState, EnergyLedger], None]
"""The signature of run observers: called with the slot index, the run state and the energy ledger after every slot."""


@dataclass(frozen=True, slots=True)
class SlotRecord:
    """Stores the metrics of a single simulated slot."""

    slot: int
    """The index of the slot. Slots are counted from 1."""
    arrivals: int
    """The number of requests that arrived during the slot."""
    served: int
    """The number of arrived requests that received a virtual machine."""
    denied: int
    """The number of arrived requests that were denied service."""
    disconnected: int
    """The number of live machines released because their UE left the coverage range of the host."""
    active_servers: int
    """The number of servers that spent the slot in the ON state."""
    slot_utility: float
    """The utility accrued by all live machines during the slot."""
    slot_energy: float
    """The energy consumed by all servers during the slot."""


@dataclass(frozen=True)
class RunResult:
    """Stores the outcome of simulating a single policy over a scenario.

    Notes:
        The service rate counts requests. When no request arrives during the run, the service rate is undefined and is
        reported as 1.0 with the 'vacuous' flag set.
    """

    policy: str
    """The name of the simulated policy."""
    seed: int
    """The seed of the simulated scenario."""
    records: tuple[SlotRecord, ...]
    """The per-slot metrics, one record per slot, in slot order."""
    placements: tuple[tuple[int, int, int], ...]
    """The (slot, request id, server id) triplets of all placements, in placement order."""
    ledger_energy: float
    """The total fleet energy reported by the run's energy ledger."""
    vm_utilities: dict[int, float] = field(default_factory=dict)
    """Maps the id of every served request to the utility its virtual machine accrued over its lifetime."""
    active_slots: tuple[int, ...] = ()
    """The number of slots every server spent in the ON state, indexed by server id."""

    @property
    def total_arrivals(self) -> int:
        """Returns the number of requests that arrived during the run."""
        return sum(record.arrivals for record in self.records)

    @property
    def total_served(self) -> int:
        """Returns the number of requests that received a virtual machine."""
        return sum(record.served for record in self.records)

    @property
    def total_denied(self) -> int:
        """Returns the number of requests that were denied service."""
        return sum(record.denied for record in self.records)

    @property
    def total_utility(self) -> float:
        """Returns the utility accrued by all virtual machines over the run."""
        return float(sum(record.slot_utility for record in self.records))

    @property
    def total_energy(self) -> float:
        """Returns the energy consumed by all servers over the run."""
        return float(sum(record.slot_energy for record in self.records))

    @property
    def vacuous(self) -> bool:
        """Returns True if no request arrived during the run."""
        return self.total_served + self.total_denied == 0

    @property
    def service_rate(self) -> float:
        """Returns the fraction of arrived requests that received a virtual machine."""
        handled = self.total_served + self.total_denied
        if handled == 0:
            return 1.0
        return self.total_served / handled

    @property
    def energy_per_unit_utility(self) -> float:
        """Returns the energy consumed per unit of accrued utility, or infinity if no utility was accrued."""
        utility = self.total_utility
        if utility <= 0:
            return float("inf")
        return self.total_energy / utility


def release_expired(state: AllocationState, slot: int) -> list[VmAllocation]:
    """Releases every virtual machine whose lifetime ended before the input slot.

    Args:
        state: The run state. Modified in place.
        slot: The index of the slot about to be processed.

    Returns:
        The list of released machines, in server and creation order.
    """
    expired = [vm for vm in state.vms() if vm.end_slot < slot]
    for vm in expired:
        state.detach(vm)
    return expired


def _idle_down(state: AllocationState, slot: int) -> None:
    """Brings every ON server that hosts no machine live in the slot after the input slot to the IDLE state."""
    for server in state.servers:
        if server.is_on and not any(vm.end_slot > slot for vm in state.hosted_vms(server.id)):
            server.power_state = PowerState.IDLE


def run(scenario: Scenario, spec: PolicySpec, *, observer: Observer | None = None) -> RunResult:
    """Simulates the input policy over the input scenario.

    The run works on private copies of the scenario servers, so the scenario can be shared between runs. Given the
    same scenario and policy, the run is fully deterministic.

    Args:
        scenario: The simulated scenario.
        spec: The simulated policy.
        observer: An optional callable invoked after every slot with the slot index, the run state and the energy
            ledger. Used to inspect the run as it progresses.

    Returns:
        The RunResult instance that stores the run metrics.
    """
    servers = [replace(server) for server in scenario.servers]
    coefficients = derive_coefficients(scenario.coefficient_settings)
    state = AllocationState(servers=servers, coefficients=coefficients)
    ledger = EnergyLedger(server_count=len(servers))

    records: list[SlotRecord] = []
    placements: list[tuple[int, int, int]] = []
    vm_utilities: dict[int, float] = {}

    for slot, arrivals in enumerate(scenario.arrivals, start=1):
        for vm in release_expired(state, slot):
            vm_utilities[vm.request_id] = vm.accrued_utility

        # Usage energy is charged on the utilization the servers start the slot with
        utilizations = [server.utilization for server in state.servers]
        outcome = run_slot(state=state, spec=spec, slot=slot, arrivals=arrivals)
        placements.extend((slot, request_id, server_id) for request_id, server_id in outcome.placements)

        active_servers = state.active_server_count
        slot_energy = 0.0
        for server in state.servers:
            slot_energy += ledger.accrue_slot(server=server, slot=slot, utilizations=utilizations[server.id])

        _idle_down(state=state, slot=slot)
        records.append(
            SlotRecord(
                slot=slot,
                arrivals=len(arrivals),
                served=len(outcome.served),
                denied=len(outcome.denied),
                disconnected=outcome.disconnected,
                active_servers=active_servers,
                slot_utility=outcome.utility,
                slot_energy=slot_energy,
            )
        )

        if observer is not None:
            observer(slot, state, ledger)

    # Machines still live when the run ends keep the utility they accrued so far
    for vm in state.vms():
        vm_utilities[vm.request_id] = vm.accrued_utility

    return RunResult(
        policy=spec.name,
        seed=scenario.config.seed,
        records=tuple(records),
        placements=tuple(placements),
        ledger_energy=ledger.total,
        vm_utilities=dict(sorted(vm_utilities.items())),
        active_slots=tuple(server.active_slots for server in state.servers),
    )


def compare(policies: Iterable[PolicySpec], scenario: Scenario, *, workers: int = 1) -> dict[str, RunResult]:
    """Runs every input policy over the same scenario.

    Args:
        policies: The policies to run. Policies have to have unique names.
        scenario: The shared scenario. Every run uses its own copy of the scenario servers.
        workers: The number of worker processes used to execute the runs. With a single worker, all runs execute in
            the calling process.

    Returns:
        A dictionary that maps the name of every policy to its RunResult, in the input policy order.

    Raises:
        ValueError: If the policy names are not unique or the number of workers is below 1.
    """
    specs = list(policies)
    names = [spec.name for spec in specs]
    if len(set(names)) != len(names):
        message = f"Unable to compare the policies. Expected unique policy names, but encountered {', '.join(names)}."
        console.error(message=message, error=ValueError)

    if workers < 1:
        message = f"Unable to compare the policies. Expected at least 1 worker, but encountered {workers}."
        console.error(message=message, error=ValueError)

    if workers == 1 or len(specs) < 2:
        return {spec.name: run(scenario, spec) for spec in specs}

    with ProcessPoolExecutor(max_workers=min(workers, len(specs))) as executor:
        results = list(executor.map(run, [scenario] * len(specs), specs))
    return dict(zip(names, results, strict=True))


def summarize(results: Iterable[RunResult]) -> dict[str, float]:
    """Computes the mean and standard deviation of the headline metrics of the input runs.

    Args:
        results: The runs to summarize. Typically, the runs of one policy over several seeds.

    Returns:
        A dictionary with the 'service_rate', 'utility' and 'epu' means and population standard deviations, stored
        under '<metric>_mean' and '<metric>_std' keys.
    """
    runs = list(results)
    metrics = {
        "service_rate": np.array([result.service_rate for result in runs], dtype=np.float64),
        "utility": np.array([result.total_utility for result in runs], dtype=np.float64),
        "epu": np.array([result.energy_per_unit_utility for result in runs], dtype=np.float64),
    }
    summary: dict[str, float] = {}
    for name, values in metrics.items():
        summary[f"{name}_mean"] = float(np.mean(values)) if values.size else float("nan")
        summary[f"{name}_std"] = float(np.std(values)) if values.size else float("nan")
    return summary
