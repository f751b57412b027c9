"""Online task offloading for NOMA-aided mobile edge computing.

Per-slot drift-plus-penalty decisions (offloading, CPU frequency, uplink
power), a barrier-Newton solver for the NOMA power subproblem, two
comparison schedulers and an experiment harness.
"""
from .config import ConfigError, EnvConfig, ScenarioConfig, SchedulerConfig, config_from_dict, load_config
from .noma_solver import SolverFailure, feasibility_backoff, sic_rates, solve_power_allocation
from .queues import SystemState
from .scheduler import KnowledgeSnapshot, SlotDecision, decide_cpu_frequency, decide_offloading
from .simulate import RunResult, Simulation, run_scenario, simulate

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "EnvConfig", "ScenarioConfig", "SchedulerConfig", "config_from_dict", "load_config",
    "SolverFailure", "feasibility_backoff", "sic_rates", "solve_power_allocation", "SystemState",
    "KnowledgeSnapshot", "SlotDecision", "decide_cpu_frequency", "decide_offloading",
    "RunResult", "Simulation", "run_scenario", "simulate",
]
