"""This package provides the slot-based simulator that runs allocation policies over sampled scenarios and collects
their service, utility and energy metrics.

All classes and functions are directly accessible using the package namespace.
"""

from .simulation import Observer, RunResult, SlotRecord, run, compare, summarize, release_expired

__all__ = ["Observer", "RunResult", "SlotRecord", "compare", "release_expired", "run", "summarize"]
