"""Pseudospectral Zakharov simulator with I-method energetics and blow-up diagnostics."""

from .spectral import Field2D, Grid2D, MultiplierSpec, apply_multiplier, imethod_symbol
from .state import ZakharovState
from .groundstate import RadialProfile, solve_townes
from .energetics import EnergyReport, ISchedule, energy_report
from .dynamics import Simulation, StepControl, strang_step

__all__ = [
    "Field2D",
    "Grid2D",
    "MultiplierSpec",
    "apply_multiplier",
    "imethod_symbol",
    "ZakharovState",
    "RadialProfile",
    "solve_townes",
    "EnergyReport",
    "ISchedule",
    "energy_report",
    "Simulation",
    "StepControl",
    "strang_step",
]

__version__ = "0.1.0"
