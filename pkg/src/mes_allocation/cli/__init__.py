"""This package provides the 'mes-sim' command line interface and the CSV writers used to store simulation results.

See the 'experiment_cli' module for the list of supported commands.
"""

from .result_io import SLOT_FIELDS, SWEEP_FIELDS, SweepRow, write_slot_csv, write_sweep_csv
from .experiment_cli import SWEEP_PARAMETERS, SweepSpec, mes_sim

__all__ = [
    "SLOT_FIELDS",
    "SWEEP_FIELDS",
    "SWEEP_PARAMETERS",
    "SweepRow",
    "SweepSpec",
    "mes_sim",
    "write_slot_csv",
    "write_sweep_csv",
]
