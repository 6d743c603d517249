"""This module contains the ScenarioConfig class that configures simulated scenarios, the Scenario class that stores a
sampled scenario and the functions used to sample scenarios and to read and write scenario configuration files.

Scenario sampling is a pure function of the configuration: all randomness comes from a numpy Generator seeded with the
configuration's seed, and the draws are always made in the same order. Sampled scenarios are immutable and can be
shared between concurrent simulation runs, which copy the servers before mutating them.
"""

from typing import Any
from pathlib import Path
from dataclasses import Field, fields, dataclass

import numpy as np
from numpy.typing import NDArray
from ataraxis_base_utilities import console, ensure_directory_exists

from .domain import UERequest, MesServer, CoefficientMode
from .feasibility import validate_request


@dataclass(frozen=True)
class CoefficientSettings:
    """Stores the inputs used to obtain the utility coefficients.

    In direct mode, only the gamma values are used. In derived mode, the gamma values are computed from the weights,
    the fleet resource totals, the distance and duration maxima and the fleet keep-on energy total.
    """

    mode: CoefficientMode = CoefficientMode.DIRECT
    gamma1: float = 0.4
    gamma2: float = 0.25
    gamma3: float = 0.25
    gamma4: float = 0.1
    gamma5: float = 0.001
    weight_cpu: float = 1.0
    weight_ram: float = 1.0
    weight_disk: float = 1.0
    weight_activation: float = 1.0
    max_distance: float = 1000.0
    max_duration: int = 10
    cpu_total: float = 0.0
    """The sum of the total CPU of all servers."""
    ram_total: float = 0.0
    """The sum of the total RAM of all servers."""
    disk_total: float = 0.0
    """The sum of the total disk space of all servers."""
    energy_total: float = 0.0
    """The sum of the keep-on power of all servers (e_max)."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Stores the parameters of a simulated scenario.

    The defaults reproduce the reference experiment: 10 servers observed for 1000 slots, Poisson arrivals with mean 5
    per slot, server CPU, RAM and disk drawn from Normal(15, 5), Normal(10, 2) and Normal(25, 5), an 800 m coverage
    range and UE distances drawn uniformly from [1, 1000] m.

    Notes:
        The resource 'std' fields are standard deviations. Sampled server resources are truncated from below at
        resource_floor_fraction times the resource mean.

        Request CPU and RAM maxima are drawn uniformly from their [low, high] ranges and the matching minima uniformly
        from [request_min_fraction * maximum, maximum].

    Raises:
        ValueError: If any field is outside its valid range or any [low, high] range is inverted.
    """

    num_servers: int = 10
    num_slots: int = 1000
    traffic_mean: float = 5.0
    """The mean number of requests arriving every slot."""

    cpu_mean: float = 15.0
    cpu_std: float = 5.0
    ram_mean: float = 10.0
    ram_std: float = 2.0
    disk_mean: float = 25.0
    disk_std: float = 5.0
    resource_floor_fraction: float = 0.1

    request_cpu_low: float = 1.0
    request_cpu_high: float = 5.0
    request_ram_low: float = 1.0
    request_ram_high: float = 3.0
    request_min_fraction: float = 0.5
    request_disk_low: float = 1.0
    request_disk_high: float = 5.0
    min_duration: int = 1
    max_duration: int = 10

    min_distance: float = 1.0
    max_distance: float = 1000.0
    coverage_range: float = 800.0

    keep_on_power_per_unit: float = 0.2
    """The keep-on power per unit of server resources (CPU + RAM + disk)."""
    keep_on_jitter_low: float = 0.8
    keep_on_jitter_high: float = 1.2
    cpu_power_fraction: float = 0.5
    """The maximum CPU usage power as a fraction of the keep-on power."""
    ram_power_fraction: float = 0.3
    disk_power_fraction: float = 0.2
    idle_power_fraction: float = 0.3
    """The minimum usage power of every resource as a fraction of that resource's maximum usage power."""

    coefficient_mode: str = "direct"
    gamma1: float = 0.4
    gamma2: float = 0.25
    gamma3: float = 0.25
    gamma4: float = 0.1
    gamma5: float = 0.001
    weight_cpu: float = 1.0
    weight_ram: float = 1.0
    weight_disk: float = 1.0
    weight_activation: float = 1.0

    seed: int = 0

    def __post_init__(self) -> None:
        problems: list[str] = []

        for name in ("num_servers", "num_slots", "min_duration", "max_duration"):
            if getattr(self, name) < 1:
                problems.append(f"'{name}' must be at least 1, but it is {getattr(self, name)}")

        if self.min_distance < 1:
            problems.append(f"'min_distance' must be at least 1, but it is {self.min_distance}")

        for name in (
            "traffic_mean",
            "cpu_mean",
            "ram_mean",
            "disk_mean",
            "resource_floor_fraction",
            "request_cpu_low",
            "request_ram_low",
            "request_min_fraction",
            "request_disk_low",
            "coverage_range",
            "keep_on_jitter_low",
            "gamma1",
            "gamma2",
            "gamma3",
            "gamma4",
            "gamma5",
            "weight_cpu",
            "weight_ram",
            "weight_disk",
            "weight_activation",
        ):
            if not getattr(self, name) > 0:
                problems.append(f"'{name}' must be positive, but it is {getattr(self, name)}")

        for name in (
            "cpu_std",
            "ram_std",
            "disk_std",
            "keep_on_power_per_unit",
            "cpu_power_fraction",
            "ram_power_fraction",
            "disk_power_fraction",
            "idle_power_fraction",
        ):
            if getattr(self, name) < 0:
                problems.append(f"'{name}' must be non-negative, but it is {getattr(self, name)}")

        for low, high in (
            ("request_cpu_low", "request_cpu_high"),
            ("request_ram_low", "request_ram_high"),
            ("request_disk_low", "request_disk_high"),
            ("min_duration", "max_duration"),
            ("min_distance", "max_distance"),
            ("keep_on_jitter_low", "keep_on_jitter_high"),
        ):
            if getattr(self, low) > getattr(self, high):
                problems.append(
                    f"'{low}' ({getattr(self, low)}) must not exceed '{high}' ({getattr(self, high)})"
                )

        for name in ("resource_floor_fraction", "request_min_fraction", "idle_power_fraction"):
            if getattr(self, name) > 1:
                problems.append(f"'{name}' must not exceed 1, but it is {getattr(self, name)}")

        if self.coefficient_mode not in tuple(CoefficientMode):
            problems.append(
                f"'coefficient_mode' must be one of {', '.join(CoefficientMode)}, but it is {self.coefficient_mode}"
            )

        if problems:
            message = f"Invalid ScenarioConfig encountered: {'; '.join(problems)}."
            console.error(message=message, error=ValueError)


@dataclass(frozen=True)
class Scenario:
    """Stores a sampled scenario: the server fleet and the requests arriving in every slot.

    The servers stored here are templates in their initial state (fully available and idle). Simulation runs copy
    them before use and never mutate the instances stored in the scenario.
    """

    config: ScenarioConfig
    """The configuration used to sample the scenario."""
    servers: tuple[MesServer, ...]
    """The sampled server fleet. The server at index k has id k."""
    arrivals: tuple[tuple[UERequest, ...], ...]
    """The requests arriving in every slot. Index i stores the arrivals of slot i + 1."""

    @property
    def num_slots(self) -> int:
        """Returns the number of simulated slots."""
        return len(self.arrivals)

    @property
    def total_arrivals(self) -> int:
        """Returns the total number of requests arriving over the whole scenario."""
        return sum(len(slot_arrivals) for slot_arrivals in self.arrivals)

    @property
    def coefficient_settings(self) -> CoefficientSettings:
        """Returns the coefficient settings of the scenario, including the fleet totals of the sampled servers."""
        config = self.config
        return CoefficientSettings(
            mode=CoefficientMode(config.coefficient_mode),
            gamma1=config.gamma1,
            gamma2=config.gamma2,
            gamma3=config.gamma3,
            gamma4=config.gamma4,
            gamma5=config.gamma5,
            weight_cpu=config.weight_cpu,
            weight_ram=config.weight_ram,
            weight_disk=config.weight_disk,
            weight_activation=config.weight_activation,
            max_distance=config.max_distance,
            max_duration=config.max_duration,
            cpu_total=float(sum(server.c_total for server in self.servers)),
            ram_total=float(sum(server.r_total for server in self.servers)),
            disk_total=float(sum(server.h_total for server in self.servers)),
            energy_total=float(sum(server.keep_on_power for server in self.servers)),
        )


def sample_scenario(config: ScenarioConfig) -> Scenario:
    """Samples the server fleet and the per-slot request arrivals described by the input configuration.

    Notes:
        Calling this function twice with the same configuration (including the seed) produces identical scenarios.

    Args:
        config: The configuration of the sampled scenario.

    Returns:
        The sampled Scenario instance.
    """
    generator = np.random.default_rng(config.seed)
    servers = _sample_servers(config=config, generator=generator)
    arrivals = _sample_arrivals(config=config, generator=generator)
    return Scenario(config=config, servers=servers, arrivals=arrivals)


def _sample_servers(config: ScenarioConfig, generator: np.random.Generator) -> tuple[MesServer, ...]:
    """Samples the server fleet.

    Server resources are drawn from the configured normal distributions and truncated from below. The keep-on power
    is proportional to the server's resource sum, scaled by a uniform per-server jitter so that the energy ranking of
    servers is not uniform.
    """
    count = config.num_servers
    floor = config.resource_floor_fraction
    cpu = np.maximum(generator.normal(config.cpu_mean, config.cpu_std, count), floor * config.cpu_mean)
    ram = np.maximum(generator.normal(config.ram_mean, config.ram_std, count), floor * config.ram_mean)
    disk = np.maximum(generator.normal(config.disk_mean, config.disk_std, count), floor * config.disk_mean)
    jitter = generator.uniform(config.keep_on_jitter_low, config.keep_on_jitter_high, count)
    keep_on: NDArray[np.float64] = config.keep_on_power_per_unit * (cpu + ram + disk) * jitter

    servers: list[MesServer] = []
    for index in range(count):
        power = float(keep_on[index])
        servers.append(
            MesServer(
                id=index,
                c_total=float(cpu[index]),
                r_total=float(ram[index]),
                h_total=float(disk[index]),
                keep_on_power=power,
                cpu_power=_power_pair(power * config.cpu_power_fraction, config.idle_power_fraction),
                ram_power=_power_pair(power * config.ram_power_fraction, config.idle_power_fraction),
                disk_power=_power_pair(power * config.disk_power_fraction, config.idle_power_fraction),
                coverage_range=config.coverage_range,
            )
        )
    return tuple(servers)


def _power_pair(maximum: float, idle_fraction: float) -> tuple[float, float]:
    """Returns the (minimum, maximum) usage power pair for the input maximum power."""
    return idle_fraction * maximum, maximum


def _sample_arrivals(config: ScenarioConfig, generator: np.random.Generator) -> tuple[tuple[UERequest, ...], ...]:
    """Samples the requests arriving in every slot.

    The number of arrivals per slot is Poisson-distributed. All request fields of the whole scenario are drawn as
    vectors, which keeps the draw order (and therefore the scenario) independent of the per-slot arrival counts.
    """
    counts = generator.poisson(config.traffic_mean, config.num_slots)
    total = int(counts.sum())

    c_max = generator.uniform(config.request_cpu_low, config.request_cpu_high, total)
    c_min = c_max * generator.uniform(config.request_min_fraction, 1.0, total)
    r_max = generator.uniform(config.request_ram_low, config.request_ram_high, total)
    r_min = r_max * generator.uniform(config.request_min_fraction, 1.0, total)
    disk = generator.uniform(config.request_disk_low, config.request_disk_high, total)
    duration = generator.integers(config.min_duration, config.max_duration, total, endpoint=True)
    distances = generator.uniform(config.min_distance, config.max_distance, (total, config.num_servers))
    slots = np.repeat(np.arange(1, config.num_slots + 1), counts)

    requests = [
        validate_request(
            UERequest(
                id=index,
                c_min=float(c_min[index]),
                c_max=float(c_max[index]),
                r_min=float(r_min[index]),
                r_max=float(r_max[index]),
                h=float(disk[index]),
                t=int(duration[index]),
                arrival_slot=int(slots[index]),
                distances=tuple(distances[index].tolist()),
            ),
            max_duration=config.max_duration,
            max_distance=config.max_distance,
        )
        for index in range(total)
    ]

    # Splits the flat request list into per-slot groups
    arrivals: list[tuple[UERequest, ...]] = []
    start = 0
    for count in counts.tolist():
        arrivals.append(tuple(requests[start : start + count]))
        start += count
    return tuple(arrivals)


def load_scenario_config(path: Path) -> ScenarioConfig:
    """Reads a scenario configuration from a flat 'key = value' text file.

    Each non-empty line that does not start with '#' has to store exactly one 'key = value' pair whose key is a
    ScenarioConfig field name. Fields missing from the file keep their default values.

    Args:
        path: The path to the configuration file.

    Returns:
        The ScenarioConfig instance that stores the loaded parameters.

    Raises:
        ValueError: If a line is malformed, a key is unknown or repeated, or the loaded values are invalid.
        TypeError: If a value cannot be converted to the type of its field.
    """
    known: dict[str, Field[Any]] = {config_field.name: config_field for config_field in fields(ScenarioConfig)}
    values: dict[str, Any] = {}

    for number, raw_line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw_line.split("#", maxsplit=1)[0].strip()
        if not line:
            continue

        key, separator, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not separator or not key or not value:
            message = (
                f"Unable to parse line {number} of the scenario configuration file {path}. Expected a 'key = value' "
                f"pair, but encountered '{raw_line.strip()}'."
            )
            console.error(message=message, error=ValueError)

        if key not in known:
            message = (
                f"Unknown key '{key}' encountered on line {number} of the scenario configuration file {path}. Use "
                f"one of the supported keys: {', '.join(known)}."
            )
            console.error(message=message, error=ValueError)

        if key in values:
            message = f"Duplicate key '{key}' encountered on line {number} of the scenario configuration file {path}."
            console.error(message=message, error=ValueError)

        values[key] = _convert_value(key=key, value=value, field_type=known[key].type)

    return ScenarioConfig(**values)


def _convert_value(key: str, value: str, field_type: Any) -> int | float | str:
    """Converts a configuration file value to the type of the ScenarioConfig field it is assigned to."""
    try:
        if field_type is int:
            return int(value)
        if field_type is float:
            return float(value)
    except ValueError:
        message = (
            f"Invalid value encountered for the '{key}' scenario configuration key. Expected a value convertible to "
            f"{field_type.__name__}, but encountered '{value}'."
        )
        console.error(message=message, error=TypeError)
        # Fallback to appease mypy, should not be reachable
        raise TypeError(message) from None  # pragma: no cover
    return value


def write_scenario_config(config: ScenarioConfig, path: Path) -> None:
    """Writes the input scenario configuration to a flat 'key = value' text file.

    The written file stores every configuration field in declaration order and can be read back with
    load_scenario_config() to reproduce the input configuration.

    Args:
        config: The configuration to write.
        path: The path to the output file. Missing parent directories are created.
    """
    path = Path(path)
    ensure_directory_exists(path)
    lines = ["# Scenario configuration. Keys mirror the ScenarioConfig field names."]
    for config_field in fields(config):
        value = getattr(config, config_field.name)
        # Floats use repr to survive the write-read round trip without precision loss
        text = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{config_field.name} = {text}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
