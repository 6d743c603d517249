"""Tests the run() and compare() functions and the result classes available through the 'simulation' module.

Besides the hand-traced examples, this suite checks the run invariants (resource conservation, accounting identities
and power states) over many seeded runs, and compares the policies against two oracles on tiny single-slot instances:
an exhaustive search for the highest attainable slot utility and a straight-line re-implementation of the policy
procedures that has to reproduce the placement trace exactly.
"""

import math
from itertools import product
from dataclasses import replace

import numpy as np
import pytest  # type: ignore
from mes_allocation import ScenarioConfig, compare, run, resolve_policy, sample_scenario
from mes_allocation.model import Scenario, UERequest, MesServer, PowerState, Coefficients
from mes_allocation.energy import EnergyLedger
from mes_allocation.utility import compute_utility
from mes_allocation.policies import POLICY_NAMES, AllocationState, run_slot
from mes_allocation.simulator import RunResult, SlotRecord, release_expired

COEFFICIENTS = Coefficients(gamma1=0.4, gamma2=0.25, gamma3=0.25, gamma4=0.1, gamma5=0.001)


def _make_server(server_id: int, resources: tuple[float, float, float], keep_on_power: float) -> MesServer:
    """Creates a test server whose usage power pairs scale with its keep-on power."""
    return MesServer(
        id=server_id,
        c_total=resources[0],
        r_total=resources[1],
        h_total=resources[2],
        keep_on_power=keep_on_power,
        cpu_power=(0.15 * keep_on_power, 0.5 * keep_on_power),
        ram_power=(0.09 * keep_on_power, 0.3 * keep_on_power),
        disk_power=(0.06 * keep_on_power, 0.2 * keep_on_power),
        coverage_range=800.0,
    )


def test_run_reference_trace() -> None:
    """Verifies the hand-traced run of a single request over a single server."""
    server = _make_server(0, (15.0, 10.0, 25.0), keep_on_power=10.0)
    request = UERequest(
        id=0, c_min=5.0, c_max=5.0, r_min=3.0, r_max=3.0, h=4.0, t=2, arrival_slot=1, distances=(100.0,)
    )
    config = ScenarioConfig(num_servers=1, num_slots=3)
    scenario = Scenario(config=config, servers=(server,), arrivals=((request,), (), ()))

    result = run(scenario, resolve_policy("cbo"))
    assert result.policy == "cbo"
    assert result.total_served == 1
    assert result.total_denied == 0
    assert result.service_rate == 1.0
    assert not result.vacuous
    assert result.total_utility == pytest.approx(0.0075, rel=1e-12)
    assert result.vm_utilities == pytest.approx({0: 0.0075}, rel=1e-12)
    assert result.placements == ((1, 0, 0),)
    assert result.active_slots == (2,)
    assert [record.active_servers for record in result.records] == [1, 1, 0]

    # Usage power follows the utilization at the start of the slot: zero in slot 1 and (1/3, 0.3, 0.16) in slot 2
    first_energy = 10.0 + 1.5 + 0.9 + 0.6
    slot_energy = 10.0 + (1.5 + 3.5 / 3) + (0.9 + 2.1 * 0.3) + (0.6 + 1.4 * 0.16)
    assert [record.slot_energy for record in result.records] == pytest.approx([first_energy, slot_energy, 0.0])
    assert result.total_energy == pytest.approx(result.ledger_energy, rel=1e-12)
    assert result.energy_per_unit_utility == pytest.approx((first_energy + slot_energy) / 0.0075)

    # The scenario servers are never mutated by a run
    assert server.power_state is PowerState.IDLE
    assert server.c_av == 15.0


def test_run_vacuous() -> None:
    """Verifies that a run without arrivals reports a vacuous service rate of 1.0."""
    server = _make_server(0, (15.0, 10.0, 25.0), keep_on_power=10.0)
    scenario = Scenario(config=ScenarioConfig(num_servers=1, num_slots=2), servers=(server,), arrivals=((), ()))
    result = run(scenario, resolve_policy("cgm"))
    assert result.vacuous
    assert result.service_rate == 1.0
    assert result.total_utility == 0.0
    assert result.total_energy == 0.0
    assert math.isinf(result.energy_per_unit_utility)
    assert result.records == (
        SlotRecord(1, 0, 0, 0, 0, 0, 0.0, 0.0),
        SlotRecord(2, 0, 0, 0, 0, 0, 0.0, 0.0),
    )


def test_run_determinism() -> None:
    """Verifies that running the same policy over the same scenario twice produces identical results."""
    scenario = sample_scenario(ScenarioConfig(num_servers=5, num_slots=80, traffic_mean=6.0, seed=3))
    for name in ("cgm", "cpowexpand"):
        assert run(scenario, resolve_policy(name)) == run(scenario, resolve_policy(name))


def test_release_expired() -> None:
    """Verifies that expired machines are released and their resources returned to their hosts."""
    servers = [_make_server(0, (15.0, 10.0, 25.0), 10.0)]
    state = AllocationState(servers, COEFFICIENTS)
    requests = [
        UERequest(id=index, c_min=4.0, c_max=4.0, r_min=1.0, r_max=1.0, h=1.0, t=t, arrival_slot=1, distances=(9.0,))
        for index, t in enumerate((1, 1, 3))
    ]
    outcome = run_slot(state, resolve_policy("cbo"), slot=1, arrivals=requests)
    assert outcome.served == [0, 1, 2]
    assert servers[0].c_av == pytest.approx(3.0)

    # Nothing expires before slot 2
    assert release_expired(state, 1) == []
    assert servers[0].c_av == pytest.approx(3.0)

    released = release_expired(state, 2)
    assert [vm.request_id for vm in released] == [0, 1]
    assert servers[0].c_av == pytest.approx(11.0)

    assert [vm.request_id for vm in release_expired(state, 4)] == [2]
    assert servers[0].c_av == 15.0


def test_compare() -> None:
    """Verifies that compare() runs every policy over the same scenario and keys the results by policy name."""
    scenario = sample_scenario(ScenarioConfig(num_servers=4, num_slots=40, traffic_mean=5.0, seed=5))
    specs = [resolve_policy(name) for name in POLICY_NAMES]
    results = compare(specs, scenario)

    assert list(results) == list(POLICY_NAMES)
    for name, result in results.items():
        assert result.policy == name
        assert result.total_served + result.total_denied == scenario.total_arrivals
        assert result == run(scenario, resolve_policy(name))

    single = compare([resolve_policy("cgm")], scenario)
    assert list(single) == ["cgm"]


def test_compare_workers() -> None:
    """Verifies that running the comparison in worker processes produces the same results in the same order."""
    scenario = sample_scenario(ScenarioConfig(num_servers=3, num_slots=30, traffic_mean=4.0, seed=8))
    specs = [resolve_policy(name) for name in ("cminexpand", "bo", "cgm")]
    parallel = compare(specs, scenario, workers=2)
    assert list(parallel) == ["cminexpand", "bo", "cgm"]
    assert parallel == compare(specs, scenario)


def test_compare_errors() -> None:
    """Verifies the error-handling behavior of the compare() function."""
    scenario = sample_scenario(ScenarioConfig(num_servers=2, num_slots=5, seed=1))
    with pytest.raises(ValueError, match="Expected unique policy names"):
        compare([resolve_policy("cgm"), resolve_policy("cgm")], scenario)
    with pytest.raises(ValueError, match="Expected at least 1 worker"):
        compare([resolve_policy("cgm")], scenario, workers=0)


def _drained(scenario: Scenario, extra_slots: int) -> Scenario:
    """Appends empty slots to the input scenario so that every machine expires before the run ends."""
    return Scenario(config=scenario.config, servers=scenario.servers, arrivals=scenario.arrivals + ((),) * extra_slots)


@pytest.mark.parametrize("seed", range(13))
@pytest.mark.parametrize("name", POLICY_NAMES)
def test_run_invariants(seed: int, name: str) -> None:
    """Verifies the run invariants at every slot boundary of randomized runs.

    Checks that availability stays within [0, total] and equals the total minus the hosted allocations, that servers
    are ON exactly when they host a machine that is live in the next slot, that the ledger total equals the sum of
    the per-server totals and that the run accounting identities hold once the run completes.
    """
    config = ScenarioConfig(
        num_servers=1 + seed % 4, num_slots=60, traffic_mean=2.0 + seed, max_duration=6, seed=seed
    )
    scenario = _drained(sample_scenario(config), extra_slots=config.max_duration)
    spec = resolve_policy(name)

    def observer(slot: int, state: AllocationState, ledger: EnergyLedger) -> None:
        for server in state.servers:
            hosted = state.hosted_vms(server.id)
            for available, total, allocated in (
                (server.c_av, server.c_total, sum(vm.alloc_c for vm in hosted)),
                (server.r_av, server.r_total, sum(vm.alloc_r for vm in hosted)),
                (server.h_av, server.h_total, sum(vm.alloc_h for vm in hosted)),
            ):
                assert -1e-9 <= available <= total + 1e-9
                assert available + allocated == pytest.approx(total, rel=1e-9, abs=1e-9)
            assert server.is_on == any(vm.end_slot > slot for vm in hosted)
            for vm in hosted:
                assert vm.request.c_min - 1e-9 <= vm.alloc_c <= vm.request.c_max + 1e-9
                assert vm.request.r_min - 1e-9 <= vm.alloc_r <= vm.request.r_max + 1e-9
                assert vm.distance <= server.coverage_range
        assert ledger.total == pytest.approx(float(np.sum(ledger.server_totals)), rel=1e-9)

    result = run(scenario, spec, observer=observer)

    for record in result.records:
        assert record.served + record.denied == record.arrivals
        assert record.disconnected == 0
    assert result.total_served + result.total_denied == scenario.total_arrivals
    assert 0.0 <= result.service_rate <= 1.0
    assert len(result.placements) == result.total_served
    assert result.total_energy == pytest.approx(result.ledger_energy, rel=1e-9)
    assert sum(result.vm_utilities.values()) == pytest.approx(result.total_utility, rel=1e-9)
    assert sum(result.active_slots) == sum(record.active_servers for record in result.records)

    # Machines of maximum-demand comprehensive policies are never expanded, so each earns its request's utility
    if name in ("cbo", "cgm"):
        requests = {request.id: request for arrivals in scenario.arrivals for request in arrivals}
        for _, request_id, server_id in result.placements:
            request = requests[request_id]
            expected = compute_utility(
                request.c_max, request.r_max, request.h, request.t, request.distances[server_id], COEFFICIENTS
            )
            assert result.vm_utilities[request_id] == pytest.approx(expected, rel=1e-9)


def _degenerate_scenario(seed: int, *, zero_ram_disk: bool = False) -> Scenario:
    """Samples a scenario in which RAM and disk never bind.

    By default, all requests ask for one unit of RAM and disk and share the same distance and duration. In such
    scenarios, the comprehensive and CPU-only utilities order requests and machines identically, so every
    comprehensive policy of the over-provisioning, greedy and min-expand families has to behave exactly like its
    CPU-only counterpart. With zero_ram_disk, requests ask for no RAM or disk and use random distances and durations.
    Both utilities are then equal, which extends the equivalence to the power-aware family.
    """
    generator = np.random.default_rng(seed)
    if zero_ram_disk:
        servers = tuple(
            _make_server(
                index,
                (
                    float(generator.uniform(6.0, 20.0)),
                    float(generator.uniform(2.0, 10.0)),
                    float(generator.uniform(5.0, 25.0)),
                ),
                float(generator.uniform(2.0, 9.0)),
            )
            for index in range(4)
        )
    else:
        servers = tuple(
            _make_server(
                index, (float(generator.uniform(6.0, 20.0)), 1000.0, 1000.0), float(generator.uniform(2.0, 9.0))
            )
            for index in range(4)
        )
    arrivals = []
    request_id = 0
    for slot in range(1, 41):
        slot_arrivals = []
        for _ in range(int(generator.poisson(4.0))):
            c_min = float(generator.uniform(1.0, 4.0))
            c_max = c_min + float(generator.uniform(0.0, 4.0))
            if zero_ram_disk:
                ram, disk = 0.0, 0.0
                duration = int(generator.integers(1, 6))
                distances = tuple(float(distance) for distance in generator.uniform(1.0, 1000.0, 4))
            else:
                ram, disk, duration, distances = 1.0, 1.0, 3, (250.0,) * 4
            slot_arrivals.append(
                UERequest(
                    id=request_id,
                    c_min=c_min,
                    c_max=c_max,
                    r_min=ram,
                    r_max=ram,
                    h=disk,
                    t=duration,
                    arrival_slot=slot,
                    distances=distances,
                )
            )
            request_id += 1
        arrivals.append(tuple(slot_arrivals))
    config = ScenarioConfig(num_servers=4, num_slots=40, seed=seed)
    return Scenario(config=config, servers=servers, arrivals=tuple(arrivals))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("comprehensive,cpu_only", [("cbo", "bo"), ("cgm", "gm"), ("cminexpand", "minexpand")])
def test_scope_degeneracy(seed: int, comprehensive: str, cpu_only: str) -> None:
    """Verifies that comprehensive and CPU-only policies coincide when RAM and disk never bind."""
    scenario = _degenerate_scenario(seed)
    first = run(scenario, resolve_policy(comprehensive))
    second = run(scenario, resolve_policy(cpu_only))
    assert first.placements == second.placements
    assert first.service_rate == second.service_rate
    assert first.total_utility == pytest.approx(second.total_utility, rel=1e-12)


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize(
    "comprehensive,cpu_only",
    [("cbo", "bo"), ("cgm", "gm"), ("cminexpand", "minexpand"), ("cpowexpand", "powexpand")],
)
def test_scope_degeneracy_without_ram_disk(seed: int, comprehensive: str, cpu_only: str) -> None:
    """Verifies that every comprehensive policy coincides with its CPU-only counterpart when requests ask for no RAM
    or disk.
    """
    scenario = _degenerate_scenario(seed, zero_ram_disk=True)
    first = run(scenario, resolve_policy(comprehensive))
    second = run(scenario, resolve_policy(cpu_only))
    assert first.placements == second.placements
    assert first.records == second.records
    assert first.total_utility == second.total_utility


def _tiny_instance(seed: int, max_requests: int = 5) -> tuple[list[MesServer], list[UERequest]]:
    """Samples a single-slot instance with at most 3 servers and at most max_requests requests."""
    generator = np.random.default_rng(seed)
    server_count = int(generator.integers(1, 4))
    servers = [
        _make_server(
            index,
            (
                float(generator.uniform(3.0, 15.0)),
                float(generator.uniform(2.0, 10.0)),
                float(generator.uniform(5.0, 25.0)),
            ),
            float(generator.uniform(2.0, 10.0)),
        )
        for index in range(server_count)
    ]
    requests = []
    for index in range(int(generator.integers(1, max_requests + 1))):
        c_min = float(generator.uniform(1.0, 5.0))
        r_min = float(generator.uniform(0.5, 3.0))
        requests.append(
            UERequest(
                id=index,
                c_min=c_min,
                c_max=c_min + float(generator.uniform(0.0, 4.0)),
                r_min=r_min,
                r_max=r_min + float(generator.uniform(0.0, 2.0)),
                h=float(generator.uniform(1.0, 5.0)),
                t=int(generator.integers(1, 6)),
                arrival_slot=1,
                distances=tuple(float(value) for value in generator.uniform(1.0, 1000.0, server_count)),
            )
        )
    return servers, requests


def _slot_rate(c: float, r: float, h: float, distance: float, coefficients: Coefficients) -> float:
    """Returns the per-slot utility rate of an allocation."""
    weighted = coefficients.gamma1 * c + coefficients.gamma2 * r + coefficients.gamma3 * h
    return weighted * coefficients.gamma4 / distance


def _relaxed_maximum(servers: list[MesServer], requests: list[UERequest], coefficients: Coefficients) -> float:
    """Returns the highest slot utility attainable by any assignment with allocations anywhere within the demand
    ranges.

    Every assignment of requests to servers (or to no server) whose minimum demands fit is evaluated. The resources
    left after the minimum demands are distributed greedily by marginal utility, which is optimal for the linear
    utility.
    """
    best = 0.0
    options = [None, *range(len(servers))]
    for assignment in product(options, repeat=len(requests)):
        if any(
            server_id is not None and request.distances[server_id] > servers[server_id].coverage_range
            for request, server_id in zip(requests, assignment, strict=True)
        ):
            continue

        total = 0.0
        feasible = True
        for server in servers:
            hosted = [
                request for request, server_id in zip(requests, assignment, strict=True) if server_id == server.id
            ]
            spare_c = server.c_total - sum(request.c_min for request in hosted)
            spare_r = server.r_total - sum(request.r_min for request in hosted)
            if spare_c < 0 or spare_r < 0 or server.h_total < sum(request.h for request in hosted):
                feasible = False
                break

            for request in hosted:
                total += _slot_rate(request.c_min, request.r_min, request.h, request.distances[server.id], coefficients)
            for weight, spare, extra in (
                (coefficients.gamma1, spare_c, lambda request: request.c_max - request.c_min),
                (coefficients.gamma2, spare_r, lambda request: request.r_max - request.r_min),
            ):
                ranked = sorted(hosted, key=lambda request: request.distances[server.id])
                for request in ranked:
                    grant = min(extra(request), spare)
                    spare -= grant
                    total += weight * grant * coefficients.gamma4 / request.distances[server.id]
        if feasible:
            best = max(best, total)
    return best


def _discrete_maximum(servers: list[MesServer], requests: list[UERequest], coefficients: Coefficients) -> float:
    """Returns the highest slot utility attainable by any assignment that allocates either the minimum or the maximum
    CPU and RAM demands of every served request.
    """
    best = 0.0
    options = [None] + [(server.id, use_max) for server in servers for use_max in (False, True)]
    for assignment in product(options, repeat=len(requests)):
        used = {server.id: [0.0, 0.0, 0.0] for server in servers}
        total = 0.0
        feasible = True
        for request, choice in zip(requests, assignment, strict=True):
            if choice is None:
                continue
            server_id, use_max = choice
            distance = request.distances[server_id]
            if distance > servers[server_id].coverage_range:
                feasible = False
                break
            c = request.c_max if use_max else request.c_min
            r = request.r_max if use_max else request.r_min
            used[server_id][0] += c
            used[server_id][1] += r
            used[server_id][2] += request.h
            total += _slot_rate(c, r, request.h, distance, coefficients)
        if feasible and all(
            used[server.id][0] <= server.c_total
            and used[server.id][1] <= server.r_total
            and used[server.id][2] <= server.h_total
            for server in servers
        ):
            best = max(best, total)
    return best


def _reference_placements(
    servers: list[MesServer], requests: list[UERequest], name: str, coefficients: Coefficients
) -> list[tuple[int, int]]:
    """Re-implements a single slot of the named policy procedure with plain lists and returns its placement trace."""
    cpu_only = not name.startswith("c")
    family = name if cpu_only else name[1:]
    expands = family in ("minexpand", "powexpand")
    gamma1, gamma2, gamma3, gamma4, gamma5 = (
        coefficients.gamma1,
        coefficients.gamma2,
        coefficients.gamma3,
        coefficients.gamma4,
        coefficients.gamma5,
    )

    available = [[server.c_total, server.r_total, server.h_total] for server in servers]
    powered = [False for _ in servers]
    ranks = [
        server.keep_on_power / (gamma1 * server.c_total + gamma2 * server.r_total + gamma3 * server.h_total)
        for server in servers
    ]
    order = sorted(range(len(servers)), key=lambda index: ranks[index])

    def utility(request: UERequest, index: int, *, use_max: bool) -> float:
        c = request.c_max if use_max else request.c_min
        if cpu_only:
            weighted = gamma1 * c + gamma2 * 0.0 + gamma3 * 0.0
        else:
            r = request.r_max if use_max else request.r_min
            weighted = gamma1 * c + gamma2 * r + gamma3 * request.h
        return weighted * gamma4 * request.t / request.distances[index]

    queue = list(requests)
    if family == "gm":
        keys = []
        for request in queue:
            key = 0.0
            for index, server in enumerate(servers):
                fits = request.c_min <= available[index][0] and request.distances[index] <= server.coverage_range
                if not cpu_only:
                    fits = fits and request.r_min <= available[index][1] and request.h <= available[index][2]
                if fits:
                    key = max(key, utility(request, index, use_max=True))
            keys.append(key)
        queue = [queue[position] for position in sorted(range(len(queue)), key=lambda position: -keys[position])]

    placements: list[tuple[int, int]] = []
    for request in queue:
        if expands:
            demand = (request.c_min, request.r_min, request.h)
        else:
            demand = (request.c_max, request.r_max, request.h)
        checked = (0,) if cpu_only else (0, 1, 2)
        for index in order:
            if request.distances[index] > servers[index].coverage_range:
                continue
            if any(not demand[resource] < (1.0 - 0.1) * available[index][resource] for resource in checked):
                continue
            if not powered[index]:
                if family == "powexpand" and not utility(request, index, use_max=False) - gamma5 * ranks[index] > 0:
                    break
                powered[index] = True
            if cpu_only and (available[index][1] < request.r_min or available[index][2] < request.h):
                break
            if expands:
                allocation = (request.c_min, request.r_min, request.h)
            elif cpu_only:
                allocation = (request.c_max, min(request.r_max, available[index][1]), request.h)
            else:
                allocation = (request.c_max, request.r_max, request.h)
            for resource in range(3):
                available[index][resource] -= allocation[resource]
            placements.append((request.id, index))
            break
    return placements


@pytest.mark.parametrize("block", range(10))
def test_tiny_instance_oracles(block: int) -> None:
    """Verifies every policy against the exhaustive-search bounds and the reference procedures on tiny instances.

    Each block evaluates 100 instances, so the whole test covers 1000 instances. The discrete bound is only checked
    for the maximum-demand comprehensive policies on instances with at most 4 requests, as it grows exponentially.
    """
    coefficients = Coefficients(gamma1=0.4, gamma2=0.25, gamma3=0.25, gamma4=0.1, gamma5=0.002)
    for seed in range(block * 100, (block + 1) * 100):
        servers, requests = _tiny_instance(seed)
        relaxed = _relaxed_maximum(servers, requests, coefficients)
        discrete = _discrete_maximum(servers, requests, coefficients) if len(requests) <= 4 else None

        for name in POLICY_NAMES:
            state = AllocationState([replace(server) for server in servers], coefficients)
            outcome = run_slot(state, resolve_policy(name), slot=1, arrivals=requests)

            assert outcome.placements == _reference_placements(servers, requests, name, coefficients), (seed, name)
            assert outcome.utility <= relaxed * (1 + 1e-9) + 1e-15, (seed, name)
            if discrete is not None and name in ("cbo", "cgm"):
                assert outcome.utility <= discrete * (1 + 1e-9) + 1e-15, (seed, name)


def test_run_result_properties() -> None:
    """Verifies that the RunResult aggregates equal the sums of the per-slot records."""
    records = (
        SlotRecord(slot=1, arrivals=3, served=2, denied=1, disconnected=0, active_servers=1, slot_utility=0.5,
                   slot_energy=2.0),
        SlotRecord(slot=2, arrivals=1, served=1, denied=0, disconnected=0, active_servers=2, slot_utility=0.25,
                   slot_energy=3.0),
    )
    result = RunResult(policy="cgm", seed=0, records=records, placements=(), ledger_energy=5.0)
    assert result.total_arrivals == 4
    assert result.total_served == 3
    assert result.total_denied == 1
    assert result.service_rate == 0.75
    assert result.total_utility == 0.75
    assert result.total_energy == 5.0
    assert result.energy_per_unit_utility == pytest.approx(5.0 / 0.75)
