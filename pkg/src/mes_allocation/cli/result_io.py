"""This module contains the functions that write simulation results to CSV files.

Two file layouts are supported. Per-slot files store one row per simulated slot of every run, with running totals of
the accrued utility and consumed energy. Sweep files store one aggregated row per (policy, swept value) pair. Both
layouts use a mandatory header row, UTF-8 encoding and '\\n' line terminators.
"""

import csv
from pathlib import Path
from dataclasses import dataclass
from collections.abc import Iterable

from ataraxis_base_utilities import ensure_directory_exists

from ..simulator.simulation import RunResult

SLOT_FIELDS: tuple[str, ...] = (
    "slot",
    "policy",
    "seed",
    "arrivals",
    "served",
    "denied",
    "active_servers",
    "slot_utility",
    "cum_utility",
    "slot_energy",
    "cum_energy",
)
"""The header of per-slot CSV files."""

SWEEP_FIELDS: tuple[str, ...] = (
    "policy",
    "param",
    "value",
    "seeds",
    "service_rate_mean",
    "service_rate_std",
    "utility_mean",
    "utility_std",
    "epu_mean",
    "epu_std",
)
"""The header of sweep CSV files."""


@dataclass(frozen=True)
class SweepRow:
    """Stores the aggregated metrics of one policy at one value of the swept parameter."""

    policy: str
    param: str
    value: int | float
    seeds: int
    """The number of seeds the metrics are aggregated over."""
    summary: dict[str, float]
    """The metric means and standard deviations, keyed as returned by the summarize() function."""


def write_slot_csv(results: Iterable[RunResult], path: Path) -> int:
    """Writes the per-slot metrics of the input runs to a CSV file.

    Rows are written run by run, in the input order, and slot by slot within each run.

    Args:
        results: The runs to write.
        path: The path to the output file. Missing parent directories are created.

    Returns:
        The number of written data rows.
    """
    path = Path(path)
    ensure_directory_exists(path)
    rows = 0
    with path.open("w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(SLOT_FIELDS)
        for result in results:
            cumulative_utility = 0.0
            cumulative_energy = 0.0
            for record in result.records:
                cumulative_utility += record.slot_utility
                cumulative_energy += record.slot_energy
                writer.writerow(
                    (
                        record.slot,
                        result.policy,
                        result.seed,
                        record.arrivals,
                        record.served,
                        record.denied,
                        record.active_servers,
                        repr(record.slot_utility),
                        repr(cumulative_utility),
                        repr(record.slot_energy),
                        repr(cumulative_energy),
                    )
                )
                rows += 1
    return rows


def write_sweep_csv(rows: Iterable[SweepRow], path: Path) -> int:
    """Writes the aggregated sweep metrics to a CSV file.

    Args:
        rows: The aggregated rows to write, in the order they should appear in the file.
        path: The path to the output file. Missing parent directories are created.

    Returns:
        The number of written data rows.
    """
    path = Path(path)
    ensure_directory_exists(path)
    count = 0
    with path.open("w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(SWEEP_FIELDS)
        for row in rows:
            writer.writerow(
                (
                    row.policy,
                    row.param,
                    row.value,
                    row.seeds,
                    repr(row.summary["service_rate_mean"]),
                    repr(row.summary["service_rate_std"]),
                    repr(row.summary["utility_mean"]),
                    repr(row.summary["utility_std"]),
                    repr(row.summary["epu_mean"]),
                    repr(row.summary["epu_std"]),
                )
            )
            count += 1
    return count
