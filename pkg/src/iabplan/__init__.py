"""Planning and evaluation toolkit for resilient mmWave IAB networks."""

from .propagation import LinkBudget, RadioParams, evaluate_link
from .scenario import Scenario, build_grid_scenario, load_scenario, save_scenario

__all__ = [
    "LinkBudget",
    "RadioParams",
    "evaluate_link",
    "Scenario",
    "build_grid_scenario",
    "load_scenario",
    "save_scenario",
]

__version__ = "0.1.0"
