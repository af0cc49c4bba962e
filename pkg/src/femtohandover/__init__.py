"""Discrete-event simulator of mobile-femtocell handover with priority admission control."""

from .cac import CellLedger, Scheme, TrafficClass
from .config import ScenarioConfig, load_config
from .metrics import erlang_b, run_scenario, run_sweep
from .simulation import Simulation

__all__ = ["CellLedger", "Scheme", "TrafficClass", "ScenarioConfig", "load_config", "erlang_b",
           "run_scenario", "run_sweep", "Simulation"]
