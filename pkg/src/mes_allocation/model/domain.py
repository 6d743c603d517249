"""This module contains the domain types shared by all other library packages: user requests, mobile edge servers,
virtual machine allocations and the utility coefficients.

Requests and coefficients are immutable value objects. Servers and VM allocations are mutable: they are owned by a
single simulation run, which copies them from the immutable scenario before mutating them.
"""

from enum import StrEnum
from dataclasses import field, dataclass

from ataraxis_base_utilities import console


class PowerState(StrEnum):
    """Stores the power states a mobile edge server can be in."""

    ON = "on"
    """The server is active and consumes keep-on energy every slot."""
    IDLE = "idle"
    """The server is in power save mode and consumes no energy."""


class CoefficientMode(StrEnum):
    """Stores the supported ways of obtaining the utility coefficients."""

    DIRECT = "direct"
    """The configured gamma values are used verbatim."""
    DERIVED = "derived"
    """The gamma values are computed from the weights, the fleet totals and the distance and time maxima."""


@dataclass(frozen=True, slots=True)
class UERequest:
    """Stores a single user equipment (UE) resource request.

    A request is one row of the request matrix (minimum and maximum CPU and RAM, disk space and duration) plus the
    matching row of the distance matrix (one distance per server) and the slot the request arrives at.

    Notes:
        The class does not validate itself. Use validate_request() from the feasibility module to enforce the request
        invariants against the scenario maxima.
    """

    id: int
    """The unique identifier of the request."""
    c_min: float
    """The minimum number of CPU units the request accepts."""
    c_max: float
    """The maximum number of CPU units the request can use."""
    r_min: float
    """The minimum number of RAM units the request accepts."""
    r_max: float
    """The maximum number of RAM units the request can use."""
    h: float
    """The number of disk units the request needs."""
    t: int
    """The number of time slots the request needs the resources for."""
    arrival_slot: int
    """The index of the slot the request arrives at. Slots are counted from 1."""
    distances: tuple[float, ...]
    """The distances, in meters, between the UE and every server. Index k stores the distance to server k."""


@dataclass(slots=True)
class MesServer:
    """Stores the state of a single mobile edge server (MES).

    Available resources start equal to the totals and are decremented and incremented by the allocation policies as
    virtual machines are created, expanded and released.

    Notes:
        The usage power pairs are (minimum, maximum) per-slot power drawn by each resource at zero and full
        utilization respectively. They parametrize the linear usage energy model.
    """

    id: int
    """The unique identifier of the server. Equals the index of the server's column in the distance matrix."""
    c_total: float
    """The total number of CPU units of the server."""
    r_total: float
    """The total number of RAM units of the server."""
    h_total: float
    """The total number of disk units of the server."""
    keep_on_power: float
    """The energy the server consumes every slot it spends in the ON state, regardless of its usage."""
    cpu_power: tuple[float, float]
    """The (minimum, maximum) CPU usage power pair."""
    ram_power: tuple[float, float]
    """The (minimum, maximum) RAM usage power pair."""
    disk_power: tuple[float, float]
    """The (minimum, maximum) disk usage power pair."""
    coverage_range: float
    """The maximum distance, in meters, of a UE the server can serve."""
    c_av: float = field(default=-1.0)
    """The number of currently available CPU units. Defaults to c_total."""
    r_av: float = field(default=-1.0)
    """The number of currently available RAM units. Defaults to r_total."""
    h_av: float = field(default=-1.0)
    """The number of currently available disk units. Defaults to h_total."""
    power_state: PowerState = PowerState.IDLE
    """The current power state of the server."""
    active_slots: int = 0
    """The number of slots the server spent in the ON state."""

    def __post_init__(self) -> None:
        # Negative sentinels mean 'fully available'
        if self.c_av < 0:
            self.c_av = self.c_total
        if self.r_av < 0:
            self.r_av = self.r_total
        if self.h_av < 0:
            self.h_av = self.h_total

        for name in ("c_total", "r_total", "h_total", "keep_on_power", "coverage_range"):
            value = getattr(self, name)
            if value < 0:
                message = (
                    f"Unable to create the MesServer with id {self.id}. Expected a non-negative '{name}' value, but "
                    f"encountered {value}."
                )
                console.error(message=message, error=ValueError)

    @property
    def is_on(self) -> bool:
        """Returns True if the server is in the ON state."""
        return self.power_state is PowerState.ON

    @property
    def utilization(self) -> tuple[float, float, float]:
        """Returns the (CPU, RAM, disk) fraction of the total resources currently allocated to virtual machines.

        Resources with a zero total report zero utilization.
        """
        return (
            _fraction(self.c_total - self.c_av, self.c_total),
            _fraction(self.r_total - self.r_av, self.r_total),
            _fraction(self.h_total - self.h_av, self.h_total),
        )


@dataclass(slots=True)
class VmAllocation:
    """Stores a live virtual machine created for a request on a server.

    The CPU and RAM allocations change when the hosting policy expands the machine. The disk allocation always equals
    the requested disk space.
    """

    request: UERequest
    """The request that owns the virtual machine."""
    server_id: int
    """The id of the server that hosts the virtual machine."""
    alloc_c: float
    """The number of CPU units currently allocated to the machine."""
    alloc_r: float
    """The number of RAM units currently allocated to the machine."""
    alloc_h: float
    """The number of disk units allocated to the machine."""
    start_slot: int
    """The first slot the machine occupies."""
    end_slot: int
    """The last slot the machine occupies (start_slot + t - 1)."""
    accrued_utility: float = 0.0
    """The utility the machine earned so far."""

    @property
    def request_id(self) -> int:
        """Returns the id of the request that owns the virtual machine."""
        return self.request.id

    @property
    def distance(self) -> float:
        """Returns the distance between the owning UE and the hosting server."""
        return self.request.distances[self.server_id]

    def is_live(self, slot: int) -> bool:
        """Returns True if the machine occupies the input slot."""
        return self.start_slot <= slot <= self.end_slot


@dataclass(frozen=True, slots=True)
class Coefficients:
    """Stores the unit-balancing and weighting coefficients used by the utility function and the activation penalty.

    Gamma 1 through 3 weigh CPU, RAM and disk, gamma 4 converts the time-over-distance ratio and gamma 5 weighs the
    penalty for activating an idle server.
    """

    gamma1: float
    gamma2: float
    gamma3: float
    gamma4: float
    gamma5: float
    mode: CoefficientMode = CoefficientMode.DIRECT

    def __post_init__(self) -> None:
        for index, value in enumerate((self.gamma1, self.gamma2, self.gamma3, self.gamma4, self.gamma5), start=1):
            if not value > 0:
                message = (
                    f"Unable to create the utility Coefficients. Expected all gamma values to be strictly positive, "
                    f"but gamma{index} is {value}."
                )
                console.error(message=message, error=ValueError)


def _fraction(used: float, total: float) -> float:
    """Returns used / total clamped to [0, 1], or 0 for empty totals."""
    if total <= 0:
        return 0.0
    return min(1.0, max(0.0, used / total))
