"""Amnesic wait-free erasure-coded register: protocol, simulator and checkers."""

from .core import T0, Pointer, SystemConfig, Timestamp
from .erasure import codec_params, encode, reconstruct
from .sim import Scenario, Schedule, Workload, explore, load_scenario, run
from .verify import check_linearizable, verify_result, verify_trace

__all__ = [
    "T0",
    "Pointer",
    "Scenario",
    "Schedule",
    "SystemConfig",
    "Timestamp",
    "Workload",
    "check_linearizable",
    "codec_params",
    "encode",
    "explore",
    "load_scenario",
    "reconstruct",
    "run",
    "verify_result",
    "verify_trace",
]
