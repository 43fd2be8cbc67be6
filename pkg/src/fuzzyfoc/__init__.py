"""PSO-tuned fuzzy speed control of an indirect field-oriented induction motor
drive fed by a three-level NPC inverter under hysteresis current control."""

from .fuzzy import BASELINE, FuzzyController, FuzzyParams
from .machine import MachineParams, MachineState
from .pso import FitnessSpec, SwarmConfig, check_stability, optimize, tune
from .sim import (BACKEND, DriveConfig, Metrics, Scenario, Trace, builtin_scenarios,
                  compute_metrics, get_scenario, run, tuning_scenario)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BASELINE", "DriveConfig", "FitnessSpec", "FuzzyController", "FuzzyParams",
    "MachineParams", "MachineState", "Metrics", "Scenario", "SwarmConfig", "Trace",
    "builtin_scenarios", "check_stability", "compute_metrics", "get_scenario", "optimize",
    "run", "tune", "tuning_scenario",
]
