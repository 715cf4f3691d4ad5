"""Distributed activation of mobile-edge-computing servers via a minority game."""
from .params import ConfigError, SystemParams, load_config
from .planner import InfeasiblePlanError, PlanResult, beta_sweep, plan
from .sim import aggregate, run_experiment

__all__ = [
    "ConfigError",
    "InfeasiblePlanError",
    "PlanResult",
    "SystemParams",
    "aggregate",
    "beta_sweep",
    "load_config",
    "plan",
    "run_experiment",
]
__version__ = "0.1.0"
