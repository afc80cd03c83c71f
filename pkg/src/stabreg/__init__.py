"""Practically self-stabilizing SWMR atomic register simulation toolkit."""

from .labels import Label, LabelParams, next_label, precedes_b
from .timestamps import EpochsQueue, Timestamp, next_timestamp, precedes_e
from .protocol import ProtocolParams
from .sim import ScenarioConfig, Simulation, parse_scenario, run_scenario
from .checker import Trace, Verdict, find_stabilization, parse_trace

__all__ = [
    "EpochsQueue",
    "Label",
    "LabelParams",
    "ProtocolParams",
    "ScenarioConfig",
    "Simulation",
    "Timestamp",
    "Trace",
    "Verdict",
    "find_stabilization",
    "next_label",
    "next_timestamp",
    "parse_scenario",
    "parse_trace",
    "precedes_b",
    "precedes_e",
    "run_scenario",
]

__version__ = "0.1.0"
