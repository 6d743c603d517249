"""This module contains the 'mes-sim' command line interface used to run single simulations and parameter sweeps and
to emit scenario configuration files.

Installing the library generates the 'mes-sim' command. Calling 'mes-sim --help' (or '--help' on any of its commands)
displays the list of supported options. The sweep command reproduces the traffic and server-count experiments: it runs
every requested policy over several seeded scenarios for every value of the swept parameter and writes one aggregated
row per (policy, value) pair.
"""

from pathlib import Path
from dataclasses import replace, dataclass
from concurrent.futures import ProcessPoolExecutor

from tqdm import tqdm
import click
from ataraxis_base_utilities import LogLevel, console

from .result_io import SweepRow, write_slot_csv, write_sweep_csv
from ..model.scenario import ScenarioConfig, sample_scenario, load_scenario_config, write_scenario_config
from ..simulator.simulation import RunResult, compare, summarize
from ..policies.policy_spec import POLICY_NAMES, PolicySpec, resolve_policy

SWEEP_PARAMETERS: tuple[str, ...] = ("traffic_mean", "num_servers")
"""The ScenarioConfig fields supported by the sweep command."""

DEFAULT_SWEEP_VALUES: dict[str, tuple[float, ...]] = {
    "traffic_mean": (1, 3, 5, 8, 12, 16, 20),
    "num_servers": (2, 4, 6, 8, 10, 12, 15, 20),
}
"""The values swept when the sweep command is called without the --values option."""


@dataclass(frozen=True)
class SweepSpec:
    """Describes a parameter sweep.

    Args:
        parameter: The swept ScenarioConfig field. Has to be one of the names stored in SWEEP_PARAMETERS.
        values: The swept values, in sweep order.
        seeds: The scenario seeds every (policy, value) pair is evaluated over.
        policies: The names of the evaluated policies.
        config: The base scenario configuration. The swept parameter and the seed override its fields.

    Raises:
        ValueError: If the parameter is not supported, the values are empty, non-positive or repeated, the
            num_servers values are not integers, or no seed or policy is given.
    """

    parameter: str
    values: tuple[float, ...]
    seeds: tuple[int, ...]
    policies: tuple[str, ...]
    config: ScenarioConfig = ScenarioConfig()

    def __post_init__(self) -> None:
        if self.parameter not in SWEEP_PARAMETERS:
            message = (
                f"Unsupported sweep parameter ({self.parameter}) encountered. Use one of the supported parameters: "
                f"{', '.join(SWEEP_PARAMETERS)}."
            )
            console.error(message=message, error=ValueError)

        if not self.values or any(not value > 0 for value in self.values):
            message = (
                f"Invalid SweepSpec encountered. Expected a non-empty sequence of positive values, but encountered "
                f"{list(self.values)}."
            )
            console.error(message=message, error=ValueError)

        if len(set(self.values)) != len(self.values):
            message = f"Invalid SweepSpec encountered. The swept values {list(self.values)} contain duplicates."
            console.error(message=message, error=ValueError)

        if self.parameter == "num_servers" and any(float(value) != int(value) for value in self.values):
            message = (
                f"Invalid SweepSpec encountered. Expected integer values for the 'num_servers' parameter, but "
                f"encountered {list(self.values)}."
            )
            console.error(message=message, error=ValueError)

        if not self.seeds or not self.policies:
            message = "Invalid SweepSpec encountered. Expected at least one seed and at least one policy."
            console.error(message=message, error=ValueError)

    def cell_config(self, value: float, seed: int) -> ScenarioConfig:
        """Returns the scenario configuration of the sweep cell at the input parameter value and seed."""
        swept: int | float = int(value) if self.parameter == "num_servers" else float(value)
        return replace(self.config, **{self.parameter: swept, "seed": seed})

    @property
    def cells(self) -> list[tuple[float, int]]:
        """Returns the (value, seed) pairs of all sweep cells, in sweep order."""
        return [(value, seed) for value in self.values for seed in self.seeds]


def _run_cell(config: ScenarioConfig, policies: tuple[str, ...]) -> list[RunResult]:
    """Samples the input scenario and runs every input policy over it.

    This function is the unit of work distributed to sweep worker processes.
    """
    specs: list[PolicySpec] = [resolve_policy(name) for name in policies]
    return list(compare(specs, sample_scenario(config)).values())


def _expand_policies(name: str) -> tuple[str, ...]:
    """Resolves the 'all' shorthand to the names of all supported policies."""
    return POLICY_NAMES if name.lower() == "all" else (name.lower(),)


def _parse_values(text: str) -> tuple[float, ...]:
    """Parses a comma-separated list of numbers."""
    try:
        return tuple(float(item) for item in text.split(",") if item.strip())
    except ValueError:
        message = f"Unable to parse the swept values. Expected a comma-separated list of numbers, but got '{text}'."
        raise click.BadParameter(message) from None


def _load_config(path: Path | None) -> ScenarioConfig:
    """Loads the scenario configuration stored under the input path, or returns the default configuration."""
    return ScenarioConfig() if path is None else load_scenario_config(path)


def _echo_summary(result: RunResult) -> None:
    """Prints the one-line summary of the input run."""
    click.echo(
        f"{result.policy}: service_rate={result.service_rate:.4f}, total_utility={result.total_utility:.6f}, "
        f"total_energy={result.total_energy:.4f}, energy_per_unit_utility={result.energy_per_unit_utility:.4f}"
    )
    if result.vacuous:
        console.echo(
            message=f"No requests arrived during the {result.policy} run. The service rate is reported as 1.0.",
            level=LogLevel.WARNING,
        )


_CONFIG_OPTION = click.option(
    "--config",
    "-c",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="The path to the scenario configuration file. If not provided, the default configuration is used.",
)


@click.group()
def mes_sim() -> None:
    """Simulates utility-driven resource allocation policies across a fleet of mobile edge servers."""
    console.enable()


@mes_sim.command()
@_CONFIG_OPTION
@click.option(
    "--policy",
    "-p",
    type=click.Choice([*POLICY_NAMES, "all"], case_sensitive=False),
    default="all",
    show_default=True,
    help="The simulated policy. Use 'all' to simulate every supported policy.",
)
@click.option(
    "--seed",
    "-s",
    type=click.IntRange(min=0, clamp=False),
    default=None,
    help="Overrides the scenario seed stored in the configuration. Example: -s 7",
)
@click.option(
    "--slots",
    "-n",
    type=click.IntRange(min=1, clamp=False),
    default=None,
    help="Overrides the number of simulated slots stored in the configuration. Example: -n 1000",
)
@click.option(
    "--workers",
    "-w",
    type=click.IntRange(min=1, clamp=False),
    default=1,
    show_default=True,
    help="The number of worker processes used to simulate the policies.",
)
@click.option(
    "--out",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="The path to the per-slot CSV file to write.",
)
def simulate(
    config_path: Path | None, policy: str, seed: int | None, slots: int | None, workers: int, out: Path
) -> None:
    """Simulates one or all policies over a single scenario and writes the per-slot metrics to a CSV file."""
    try:
        config = _load_config(config_path)
        overrides: dict[str, int] = {}
        if seed is not None:
            overrides["seed"] = seed
        if slots is not None:
            overrides["num_slots"] = slots
        config = replace(config, **overrides)

        scenario = sample_scenario(config)
        console.echo(
            message=(
                f"Simulating {scenario.num_slots} slots with {config.num_servers} servers and "
                f"{scenario.total_arrivals} requests (seed {config.seed})."
            ),
            level=LogLevel.INFO,
        )
        specs = [resolve_policy(name) for name in _expand_policies(policy)]
        results = compare(specs, scenario, workers=workers)
        rows = write_slot_csv(results.values(), out)
    except (ValueError, TypeError) as error:
        raise click.ClickException(str(error)) from error

    for result in results.values():
        _echo_summary(result)
    console.echo(message=f"Wrote {rows} per-slot rows to {out}.", level=LogLevel.INFO)


@mes_sim.command()
@_CONFIG_OPTION
@click.option(
    "--param",
    "parameter",
    type=click.Choice(SWEEP_PARAMETERS, case_sensitive=True),
    default="traffic_mean",
    show_default=True,
    help="The swept scenario parameter.",
)
@click.option(
    "--values",
    "values_text",
    type=str,
    default=None,
    help="A comma-separated list of swept values. Defaults to 1,3,5,8,12,16,20 for traffic_mean and "
    "2,4,6,8,10,12,15,20 for num_servers. Example: --values 1,5,10",
)
@click.option(
    "--seeds",
    type=click.IntRange(min=1, clamp=False),
    default=10,
    show_default=True,
    help="The number of seeds every (policy, value) pair is evaluated over. Seeds are consecutive, starting at the "
    "configured (or --seed) seed.",
)
@click.option(
    "--seed",
    "-s",
    type=click.IntRange(min=0, clamp=False),
    default=None,
    help="Overrides the first seed of the sweep.",
)
@click.option(
    "--slots",
    "-n",
    type=click.IntRange(min=1, clamp=False),
    default=None,
    help="Overrides the number of simulated slots stored in the configuration.",
)
@click.option(
    "--policies",
    type=click.Choice([*POLICY_NAMES, "all"], case_sensitive=False),
    multiple=True,
    default=("all",),
    show_default=True,
    help="The evaluated policies. Repeat the option to evaluate several policies.",
)
@click.option(
    "--workers",
    "-w",
    type=click.IntRange(min=1, clamp=False),
    default=1,
    show_default=True,
    help="The number of worker processes used to evaluate the sweep cells.",
)
@click.option(
    "--runs-dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="If provided, the per-slot CSV file of every sweep cell is written to this directory.",
)
@click.option("--no-progress", is_flag=True, default=False, help="Disables the progress bar.")
@click.option(
    "--out",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="The path to the aggregated sweep CSV file to write.",
)
def sweep(
    config_path: Path | None,
    parameter: str,
    values_text: str | None,
    seeds: int,
    seed: int | None,
    slots: int | None,
    policies: tuple[str, ...],
    workers: int,
    runs_dir: Path | None,
    no_progress: bool,
    out: Path,
) -> None:
    """Evaluates the policies over a range of values of one scenario parameter and writes the aggregated metrics to a
    CSV file.
    """
    values = DEFAULT_SWEEP_VALUES[parameter] if values_text is None else _parse_values(values_text)

    names: list[str] = []
    for policy in policies:
        names.extend(name for name in _expand_policies(policy) if name not in names)

    try:
        config = _load_config(config_path)
        if slots is not None:
            config = replace(config, num_slots=slots)
        first_seed = config.seed if seed is None else seed
        spec = SweepSpec(
            parameter=parameter,
            values=values,
            seeds=tuple(range(first_seed, first_seed + seeds)),
            policies=tuple(names),
            config=config,
        )
        cells = spec.cells
        configs = [spec.cell_config(value, cell_seed) for value, cell_seed in cells]
    except (ValueError, TypeError) as error:
        raise click.ClickException(str(error)) from error

    console.echo(
        message=f"Running {len(cells)} sweep cells ({len(spec.values)} values x {len(spec.seeds)} seeds).",
        level=LogLevel.INFO,
    )

    progress = tqdm(total=len(cells), desc=f"Sweeping {parameter}", unit="cell", disable=no_progress)
    cell_results: list[list[RunResult]] = []
    if workers == 1:
        for cell_config in configs:
            cell_results.append(_run_cell(cell_config, spec.policies))
            progress.update()
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            # map() yields results in submission order, which keeps the output independent of completion order
            for result in executor.map(_run_cell, configs, [spec.policies] * len(configs)):
                cell_results.append(result)
                progress.update()
    progress.close()

    rows: list[SweepRow] = []
    for position, name in enumerate(spec.policies):
        for value in spec.values:
            runs = [
                results[position]
                for (cell_value, _), results in zip(cells, cell_results, strict=True)
                if cell_value == value
            ]
            rows.append(
                SweepRow(
                    policy=name,
                    param=parameter,
                    value=int(value) if parameter == "num_servers" or float(value).is_integer() else value,
                    seeds=len(runs),
                    summary=summarize(runs),
                )
            )

    if runs_dir is not None:
        for (value, cell_seed), results in zip(cells, cell_results, strict=True):
            for result in results:
                write_slot_csv([result], runs_dir / f"{result.policy}_{parameter}_{value:g}_seed{cell_seed}.csv")

    count = write_sweep_csv(rows, out)
    console.echo(message=f"Sweep complete. Wrote {count} aggregated rows to {out}.", level=LogLevel.SUCCESS)


@mes_sim.command()
@_CONFIG_OPTION
@click.option(
    "--out",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="The path to the configuration file to write.",
)
def config(config_path: Path | None, out: Path) -> None:
    """Writes the default (or the loaded) scenario configuration to a file that can be edited and passed back via
    --config.
    """
    try:
        write_scenario_config(_load_config(config_path), out)
    except (ValueError, TypeError) as error:
        raise click.ClickException(str(error)) from error
    console.echo(message=f"Wrote the scenario configuration to {out}.", level=LogLevel.INFO)
