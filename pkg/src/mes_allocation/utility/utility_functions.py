"""This module contains the utility mathematics: the comprehensive utility function and its bounds, the derivation of
the utility coefficients, the idle-server activation penalty and the optimal server selection.

The utility an edge server earns for serving a request grows linearly with the allocated CPU, RAM and disk and with
the duration of the allocation, and decays inversely with the distance between the UE and the server:

    u = (gamma1 * c + gamma2 * r + gamma3 * h) * gamma4 * t / d

All functions in this module are pure and safe to call concurrently.
"""

from typing import Literal
from dataclasses import dataclass
from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray, ArrayLike
from ataraxis_base_utilities import console

from ..model.domain import UERequest, Coefficients, CoefficientMode
from ..model.scenario import CoefficientSettings


@dataclass(frozen=True, slots=True)
class UtilityBounds:
    """Stores the minimum and maximum utility a server can earn from a request."""

    u_min: float
    """The utility earned when the request receives its minimum CPU and RAM."""
    u_max: float
    """The utility earned when the request receives its maximum CPU and RAM."""


def compute_utility(
    alloc_c: float, alloc_r: float, alloc_h: float, duration: float, distance: float, coefficients: Coefficients
) -> float:
    """Computes the utility a server earns for allocating the input resources to a UE for the input duration.

    Args:
        alloc_c: The number of allocated CPU units.
        alloc_r: The number of allocated RAM units.
        alloc_h: The number of allocated disk units.
        duration: The number of slots the resources are allocated for. Use 1 to get the per-slot utility rate.
        distance: The distance, in meters, between the UE and the server.
        coefficients: The utility coefficients.

    Returns:
        The dimensionless utility. It is strictly positive when any resource and the duration are positive.

    Raises:
        ValueError: If the distance is not positive.
    """
    if not distance > 0:
        message = (
            f"Unable to compute the utility. Expected a positive UE-to-server distance, but encountered {distance}."
        )
        console.error(message=message, error=ValueError)

    weighted = coefficients.gamma1 * alloc_c + coefficients.gamma2 * alloc_r + coefficients.gamma3 * alloc_h
    return weighted * coefficients.gamma4 * duration / distance


def cpu_utility(alloc_c: float, duration: float, distance: float, coefficients: Coefficients) -> float:
    """Computes the CPU-only utility used internally by the baseline (cpu_only) policies.

    This is the comprehensive utility with the RAM and disk terms dropped.
    """
    return compute_utility(
        alloc_c=alloc_c, alloc_r=0.0, alloc_h=0.0, duration=duration, distance=distance, coefficients=coefficients
    )


def utility_bounds(
    request: UERequest, distance: float, coefficients: Coefficients, *, cpu_only: bool = False
) -> UtilityBounds:
    """Computes the minimum and maximum utility a server at the input distance can earn from the input request.

    Args:
        request: The evaluated request.
        distance: The distance, in meters, between the request's UE and the server.
        coefficients: The utility coefficients.
        cpu_only: Determines whether to compute the CPU-only utility bounds used by the baseline policies.

    Returns:
        The UtilityBounds instance. u_min uses the minimum CPU and RAM, u_max the maximum CPU and RAM. Both use the
        requested disk and duration.
    """
    if cpu_only:
        return UtilityBounds(
            u_min=cpu_utility(request.c_min, request.t, distance, coefficients),
            u_max=cpu_utility(request.c_max, request.t, distance, coefficients),
        )
    return UtilityBounds(
        u_min=compute_utility(request.c_min, request.r_min, request.h, request.t, distance, coefficients),
        u_max=compute_utility(request.c_max, request.r_max, request.h, request.t, distance, coefficients),
    )


def utility_matrix(
    requests: Sequence[UERequest],
    coefficients: Coefficients,
    *,
    bound: Literal["min", "max"] = "max",
    cpu_only: bool = False,
) -> NDArray[np.float64]:
    """Computes the utility matrix of the input requests over all servers.

    Element (j, k) of the matrix stores the minimum or maximum utility server k earns from request j, evaluated at
    the distance stored in the request's distances row.

    Args:
        requests: The evaluated requests. All requests have to store the same number of distances.
        coefficients: The utility coefficients.
        bound: Determines whether to evaluate the minimum ('min') or the maximum ('max') requested resources.
        cpu_only: Determines whether to compute the CPU-only utilities used by the baseline policies.

    Returns:
        A two-dimensional float64 array with one row per request and one column per server.

    Raises:
        ValueError: If the bound is not supported or any distance is not positive.
    """
    if bound not in ("min", "max"):
        message = f"Unsupported 'bound' argument value ({bound}) encountered. Use one of: min, max."
        console.error(message=message, error=ValueError)

    if not requests:
        return np.zeros((0, 0), dtype=np.float64)

    distances = np.array([request.distances for request in requests], dtype=np.float64)
    if np.any(distances <= 0):
        message = "Unable to compute the utility matrix. Expected all UE-to-server distances to be positive."
        console.error(message=message, error=ValueError)

    use_max = bound == "max"
    cpu = np.array([request.c_max if use_max else request.c_min for request in requests], dtype=np.float64)
    ram = np.array([request.r_max if use_max else request.r_min for request in requests], dtype=np.float64)
    disk = np.array([request.h for request in requests], dtype=np.float64)
    duration = np.array([request.t for request in requests], dtype=np.float64)

    weighted = coefficients.gamma1 * cpu
    if not cpu_only:
        weighted = weighted + coefficients.gamma2 * ram + coefficients.gamma3 * disk

    result: NDArray[np.float64] = (weighted * coefficients.gamma4 * duration)[:, np.newaxis] / distances
    return result


def derive_coefficients(settings: CoefficientSettings) -> Coefficients:
    """Resolves the utility coefficients described by the input settings.

    In direct mode, returns the configured gamma values verbatim. In derived mode, computes gamma 1 through 3 as the
    resource weights divided by the fleet totals of the matching resources, gamma 4 as the maximum distance divided by
    the maximum duration and gamma 5 as the activation weight divided by the fleet keep-on energy total.

    Args:
        settings: The coefficient settings.

    Returns:
        The resolved Coefficients instance.

    Raises:
        ValueError: If any derived-mode input is not positive.
    """
    if settings.mode is CoefficientMode.DIRECT:
        return Coefficients(
            gamma1=settings.gamma1,
            gamma2=settings.gamma2,
            gamma3=settings.gamma3,
            gamma4=settings.gamma4,
            gamma5=settings.gamma5,
            mode=CoefficientMode.DIRECT,
        )

    for name in ("cpu_total", "ram_total", "disk_total", "energy_total", "max_distance", "max_duration"):
        value = getattr(settings, name)
        if not value > 0:
            message = (
                f"Unable to derive the utility coefficients. Expected a positive '{name}' value, but encountered "
                f"{value}."
            )
            console.error(message=message, error=ValueError)

    return Coefficients(
        gamma1=settings.weight_cpu / settings.cpu_total,
        gamma2=settings.weight_ram / settings.ram_total,
        gamma3=settings.weight_disk / settings.disk_total,
        gamma4=settings.max_distance / settings.max_duration,
        gamma5=settings.weight_activation / settings.energy_total,
        mode=CoefficientMode.DERIVED,
    )


def penalized_utility(utility: float, *, server_on: bool, energy_rank: float, gamma5: float) -> float:
    """Applies the idle-server activation penalty to the input utility.

    Args:
        utility: The unpenalized utility.
        server_on: Determines whether the candidate server is already ON. ON servers are not penalized.
        energy_rank: The energy consumed per unit of capacity of the candidate server.
        gamma5: The activation penalty weight.

    Returns:
        The input utility for ON servers, or the utility minus gamma5 * energy_rank for idle servers. The result may
        be negative.
    """
    if server_on:
        return utility
    return utility - gamma5 * energy_rank


def optimal_server(utilities: ArrayLike, feasible: ArrayLike) -> int | None:
    """Finds the feasible server that earns the highest utility.

    Args:
        utilities: The utilities every server earns from a request.
        feasible: The feasibility vector of the request over the same servers.

    Returns:
        The index of the feasible server with the highest utility, with ties broken by the lowest index, or None if no
        server is feasible.

    Raises:
        ValueError: If the utilities and the feasibility vector have different lengths.
    """
    utility_array = np.asarray(utilities, dtype=np.float64).ravel()
    feasible_array = np.asarray(feasible, dtype=np.bool_).ravel()

    if utility_array.size != feasible_array.size:
        message = (
            f"Unable to select the optimal server. The utilities store {utility_array.size} values, but the "
            f"feasibility vector stores {feasible_array.size} values."
        )
        console.error(message=message, error=ValueError)

    if not feasible_array.any():
        return None

    # argmax returns the first maximum, which implements the lowest-index tie break
    masked = np.where(feasible_array, utility_array, -np.inf)
    return int(np.argmax(masked))
