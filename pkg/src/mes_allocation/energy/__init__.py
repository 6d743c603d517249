"""This package provides the server energy model: capacity, energy-per-capacity ranking, linear usage power and the
EnergyLedger class that accumulates the fleet's energy consumption.

All classes and methods are directly accessible using the package namespace.
"""

from .energy_model import EnergyLedger, capacity, energy_rank, usage_power, rank_servers

__all__ = ["EnergyLedger", "capacity", "energy_rank", "rank_servers", "usage_power"]
