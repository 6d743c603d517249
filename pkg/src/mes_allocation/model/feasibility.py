"""This module contains the functions that validate user requests and decide whether a server can host a request.

A server is feasible for a request when its currently available CPU, RAM and disk cover the request's minimum
demands and the UE lies within the server's coverage range.
"""

from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray
from ataraxis_base_utilities import console

from .domain import UERequest, MesServer


def validate_request(request: UERequest, *, max_duration: int, max_distance: float) -> UERequest:
    """Verifies that the input request satisfies all request invariants and returns it unchanged.

    Args:
        request: The request to validate.
        max_duration: The maximum number of slots a request is allowed to ask for.
        max_distance: The maximum allowed distance, in meters, between a UE and any server.

    Returns:
        The input request, if it is valid.

    Raises:
        ValueError: If any request field violates its invariant. The message names the offending field.
    """
    problem: str | None = None
    if not 0 < request.c_min:
        problem = f"'c_min' must be positive, but it is {request.c_min}"
    elif request.c_min > request.c_max:
        problem = f"'c_min' ({request.c_min}) must not exceed 'c_max' ({request.c_max})"
    elif not 0 < request.r_min:
        problem = f"'r_min' must be positive, but it is {request.r_min}"
    elif request.r_min > request.r_max:
        problem = f"'r_min' ({request.r_min}) must not exceed 'r_max' ({request.r_max})"
    elif not 0 < request.h:
        problem = f"'h' must be positive, but it is {request.h}"
    elif not 1 <= request.t <= max_duration:
        problem = f"'t' must be within [1, {max_duration}], but it is {request.t}"
    else:
        for index, distance in enumerate(request.distances):
            if not 1 <= distance <= max_distance:
                problem = f"'distances' element {index} must be within [1, {max_distance}], but it is {distance}"
                break

    if problem is not None:
        message = f"Invalid UERequest with id {request.id} encountered during validation: {problem}."
        console.error(message=message, error=ValueError)

    return request


def feasibility(request: UERequest, server: MesServer, distance: float) -> bool:
    """Determines whether the input server can host the input request at the current instant.

    The server is feasible if its available CPU, RAM and disk are at least the request's minimum CPU, minimum RAM and
    disk demands, and the distance between the UE and the server does not exceed the server's coverage range.

    Args:
        request: The evaluated request.
        server: The evaluated server.
        distance: The distance, in meters, between the request's UE and the server.

    Returns:
        True if the server is feasible for the request, False otherwise.
    """
    return (
        request.c_min <= server.c_av
        and request.r_min <= server.r_av
        and request.h <= server.h_av
        and distance <= server.coverage_range
    )


def feasibility_vector(request: UERequest, servers: Sequence[MesServer]) -> NDArray[np.bool_]:
    """Computes the feasibility of every input server for the input request.

    Args:
        request: The evaluated request. Its distances row has to store one distance per server.
        servers: The evaluated servers. The server stored under index k has to match distance k of the request.

    Returns:
        A one-dimensional boolean array whose element k is True if server k is feasible for the request.

    Raises:
        ValueError: If the number of request distances does not match the number of servers.
    """
    if len(request.distances) != len(servers):
        message = (
            f"Unable to compute the feasibility vector for the UERequest with id {request.id}. The request stores "
            f"{len(request.distances)} distances, but {len(servers)} servers were provided."
        )
        console.error(message=message, error=ValueError)

    return np.array(
        [feasibility(request, server, distance) for server, distance in zip(servers, request.distances, strict=True)],
        dtype=np.bool_,
    )
