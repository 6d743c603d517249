"""This module contains the server energy model: the weighted capacity of a server, the energy-per-capacity rank used
to order servers, the linear usage power model and the EnergyLedger class that accumulates the energy consumed by a
server fleet over a simulation run.

The energy a server consumes in a slot it spends ON is its keep-on power plus the usage power of its CPU, RAM and
disk. Each usage power grows linearly from its minimum at zero utilization to its maximum at full utilization.
IDLE servers consume no energy.
"""

from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray
from ataraxis_base_utilities import console

from ..model.domain import MesServer, Coefficients


def capacity(server: MesServer, coefficients: Coefficients) -> float:
    """Computes the weighted capacity of the input server.

    Args:
        server: The evaluated server.
        coefficients: The utility coefficients. Gamma 1 through 3 weigh the server's total CPU, RAM and disk.

    Returns:
        The dimensionless capacity of the server.
    """
    return (
        coefficients.gamma1 * server.c_total
        + coefficients.gamma2 * server.r_total
        + coefficients.gamma3 * server.h_total
    )


def energy_rank(server: MesServer, coefficients: Coefficients) -> float:
    """Computes the keep-on energy the input server consumes per unit of its capacity.

    Servers with a lower rank offer more capacity for the same keep-on energy and are tried first by the allocation
    policies.

    Args:
        server: The evaluated server.
        coefficients: The utility coefficients used to compute the server's capacity.

    Returns:
        The energy-per-capacity rank of the server.

    Raises:
        ValueError: If the server has zero capacity.
    """
    server_capacity = capacity(server=server, coefficients=coefficients)
    if not server_capacity > 0:
        message = (
            f"Unable to compute the energy rank of the MesServer with id {server.id}. Expected a positive capacity, "
            f"but the server's capacity is {server_capacity}."
        )
        console.error(message=message, error=ValueError)
    return server.keep_on_power / server_capacity


def rank_servers(servers: Sequence[MesServer], coefficients: Coefficients) -> list[int]:
    """Sorts the input servers in increasing order of their energy rank.

    Args:
        servers: The servers to sort.
        coefficients: The utility coefficients used to compute the server capacities.

    Returns:
        The list of positions of the input servers, ordered by increasing energy rank. Servers with equal ranks keep
        their input order.
    """
    ranks = np.array([energy_rank(server, coefficients) for server in servers], dtype=np.float64)
    return [int(index) for index in np.argsort(ranks, kind="stable")]


def usage_power(
    server: MesServer, cpu_utilization: float, ram_utilization: float, disk_utilization: float
) -> tuple[float, float, float]:
    """Computes the per-slot usage power drawn by the CPU, RAM and disk of the input server.

    Args:
        server: The evaluated server. Its (minimum, maximum) power pairs parametrize the linear model.
        cpu_utilization: The fraction of the server's CPU allocated to virtual machines.
        ram_utilization: The fraction of the server's RAM allocated to virtual machines.
        disk_utilization: The fraction of the server's disk allocated to virtual machines.

    Returns:
        A tuple that stores the CPU, RAM and disk usage power.

    Raises:
        ValueError: If any utilization is outside the [0, 1] range.
    """
    utilizations = (cpu_utilization, ram_utilization, disk_utilization)
    for name, value in zip(("cpu", "ram", "disk"), utilizations, strict=True):
        if not 0 <= value <= 1:
            message = (
                f"Unable to compute the usage power of the MesServer with id {server.id}. Expected the {name} "
                f"utilization to be within [0, 1], but encountered {value}."
            )
            console.error(message=message, error=ValueError)

    powers = []
    pairs = (server.cpu_power, server.ram_power, server.disk_power)
    for (minimum, maximum), value in zip(pairs, utilizations, strict=True):
        powers.append(minimum + (maximum - minimum) * value)
    return powers[0], powers[1], powers[2]


class EnergyLedger:
    """Accumulates the keep-on and usage energy consumed by a server fleet over a simulation run.

    The ledger is single-owner mutable state: each simulation run creates its own ledger.

    Args:
        server_count: The number of servers in the tracked fleet. Server ids have to be in [0, server_count).

    Attributes:
        _keep_on: The keep-on energy accumulated by every server.
        _usage: The (CPU, RAM, disk) usage energy accumulated by every server. Has one row per server.
        _last_slot: The last slot every server accrued energy for. Used to reject double accrual.
    """

    def __init__(self, server_count: int) -> None:
        self._keep_on: NDArray[np.float64] = np.zeros(server_count, dtype=np.float64)
        self._usage: NDArray[np.float64] = np.zeros((server_count, 3), dtype=np.float64)
        self._last_slot: NDArray[np.int64] = np.zeros(server_count, dtype=np.int64)

    def __repr__(self) -> str:
        """Returns a string representation of the EnergyLedger instance."""
        return f"EnergyLedger(servers={self._keep_on.size}, total={self.total})"

    def accrue_slot(self, server: MesServer, slot: int, utilizations: tuple[float, float, float]) -> float:
        """Adds the energy the input server consumed during the input slot to the ledger.

        ON servers accrue their keep-on power plus the usage power computed from the input utilizations and have
        their active slot counter incremented. IDLE servers accrue nothing.

        Args:
            server: The server to account for.
            slot: The index of the accounted slot. Slots are counted from 1.
            utilizations: The (CPU, RAM, disk) utilization of the server at the start of the slot, as returned by
                MesServer.utilization before the slot's placements.

        Returns:
            The energy added to the ledger.

        Raises:
            RuntimeError: If the server already accrued energy for the input slot.
        """
        if not server.is_on:
            return 0.0

        if self._last_slot[server.id] >= slot:
            message = (
                f"Unable to accrue energy for the MesServer with id {server.id} in slot {slot}. The server already "
                f"accrued energy for slot {self._last_slot[server.id]}."
            )
            console.error(message=message, error=RuntimeError)

        cpu, ram, disk = usage_power(server, *utilizations)
        self._keep_on[server.id] += server.keep_on_power
        self._usage[server.id] += (cpu, ram, disk)
        self._last_slot[server.id] = slot
        server.active_slots += 1
        return server.keep_on_power + cpu + ram + disk

    @property
    def keep_on_energy(self) -> NDArray[np.float64]:
        """Returns a copy of the keep-on energy accumulated by every server."""
        return self._keep_on.copy()

    @property
    def usage_energy(self) -> NDArray[np.float64]:
        """Returns a copy of the (CPU, RAM, disk) usage energy accumulated by every server, one row per server."""
        return self._usage.copy()

    @property
    def server_totals(self) -> NDArray[np.float64]:
        """Returns the total energy consumed by every server."""
        totals: NDArray[np.float64] = self._keep_on + self._usage.sum(axis=1)
        return totals

    @property
    def total(self) -> float:
        """Returns the total energy consumed by the whole fleet."""
        return float(self.server_totals.sum())
